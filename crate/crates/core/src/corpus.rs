//! Sparse count data: ingest, validation, and cluster-level aggregation.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CorpusError;
use crate::partition::Partition;

pub type Count = u32;

/// Sparse N×V matrix of strictly positive counts, stored row-compressed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    n_docs: usize,
    n_words: usize,
    indptr: Vec<usize>,
    words: Vec<usize>,
    counts: Vec<Count>,
    doc_lengths: Vec<u64>,
}

/// Mapping from pruned column indices back to the input's column indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRemap {
    pub original_n_words: usize,
    /// `kept[new] = old`
    pub kept: Vec<usize>,
}

impl ColumnRemap {
    pub fn n_dropped(&self) -> usize {
        self.original_n_words - self.kept.len()
    }
}

impl CountMatrix {
    /// Builds a matrix from `(doc, word, count)` triplets.
    ///
    /// Duplicate coordinates are summed, zero counts ignored, and columns that
    /// end up empty are removed. Indices must already be in range.
    pub fn from_triplets<I>(
        n_docs: usize,
        n_words: usize,
        triplets: I,
    ) -> Result<(Self, ColumnRemap), CorpusError>
    where
        I: IntoIterator<Item = (usize, usize, Count)>,
    {
        let mut rows: Vec<BTreeMap<usize, Count>> = vec![BTreeMap::new(); n_docs];
        for (doc, word, count) in triplets {
            if doc >= n_docs || word >= n_words {
                return Err(CorpusError::Parse {
                    line: 0,
                    message: format!("entry ({doc}, {word}) outside {n_docs}x{n_words}"),
                });
            }
            if count == 0 {
                continue;
            }
            let cell = rows[doc].entry(word).or_insert(0);
            *cell = cell.checked_add(count).ok_or_else(|| CorpusError::Parse {
                line: 0,
                message: format!("count overflow at ({doc}, {word})"),
            })?;
        }
        if rows.iter().all(|r| r.is_empty()) {
            return Err(CorpusError::NoObservations);
        }
        if let Some(doc) = rows.iter().position(|r| r.is_empty()) {
            return Err(CorpusError::EmptyDocument { doc });
        }

        let mut used = vec![false; n_words];
        for row in &rows {
            for &w in row.keys() {
                used[w] = true;
            }
        }
        let mut new_index = vec![usize::MAX; n_words];
        let mut kept = Vec::new();
        for (w, &u) in used.iter().enumerate() {
            if u {
                new_index[w] = kept.len();
                kept.push(w);
            }
        }
        let remap = ColumnRemap {
            original_n_words: n_words,
            kept,
        };
        if remap.n_dropped() > 0 {
            log::info!(
                "pruned {} all-zero columns ({} -> {})",
                remap.n_dropped(),
                n_words,
                remap.kept.len()
            );
        }

        let mut indptr = Vec::with_capacity(n_docs + 1);
        let mut words = Vec::new();
        let mut counts = Vec::new();
        let mut doc_lengths = Vec::with_capacity(n_docs);
        indptr.push(0);
        for row in rows {
            let mut length = 0u64;
            // BTreeMap keys are sorted and the remap is monotone.
            for (w, c) in row {
                words.push(new_index[w]);
                counts.push(c);
                length += c as u64;
            }
            indptr.push(words.len());
            doc_lengths.push(length);
        }
        let matrix = Self {
            n_docs,
            n_words: remap.kept.len(),
            indptr,
            words,
            counts,
            doc_lengths,
        };
        Ok((matrix, remap))
    }

    /// Dense row-major constructor, mostly for tests and small examples.
    pub fn from_dense(rows: &[Vec<Count>]) -> Result<(Self, ColumnRemap), CorpusError> {
        let n_words = rows.first().map_or(0, |r| r.len());
        let triplets = rows.iter().enumerate().flat_map(|(d, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(move |(w, &c)| (d, w, c))
        });
        Self::from_triplets(rows.len(), n_words, triplets)
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn n_words(&self) -> usize {
        self.n_words
    }

    pub fn nnz(&self) -> usize {
        self.words.len()
    }

    /// Word indices (ascending) and counts of document `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[Count]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.words[span.clone()], &self.counts[span])
    }

    pub fn doc_lengths(&self) -> &[u64] {
        &self.doc_lengths
    }

    pub fn total_tokens(&self) -> u64 {
        self.doc_lengths.iter().sum()
    }

    /// Σ_i x_iv for every word.
    pub fn column_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.n_words];
        for (&w, &c) in self.words.iter().zip(&self.counts) {
            sums[w] += c as u64;
        }
        sums
    }

    pub fn to_dense(&self) -> Vec<Vec<Count>> {
        (0..self.n_docs)
            .map(|i| {
                let mut row = vec![0; self.n_words];
                let (w, c) = self.row(i);
                for (&w, &c) in w.iter().zip(c) {
                    row[w] = c;
                }
                row
            })
            .collect()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Count)> + '_ {
        (0..self.n_docs).flat_map(move |i| {
            let (w, c) = self.row(i);
            w.iter().zip(c).map(move |(&w, &c)| (i, w, c))
        })
    }
}

/// Optional term list attached to the columns of a [`CountMatrix`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
}

impl Vocabulary {
    pub fn new(terms: Vec<String>) -> Result<Self, CorpusError> {
        let mut seen = std::collections::HashSet::with_capacity(terms.len());
        for t in &terms {
            if !seen.insert(t.as_str()) {
                return Err(CorpusError::DuplicateTerm(t.clone()));
            }
        }
        Ok(Self { terms })
    }

    /// Generated tokens `w0001`, `w0002`, ...
    pub fn synthetic(n_words: usize) -> Self {
        Self {
            terms: (1..=n_words).map(|i| format!("w{i:04}")).collect(),
        }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn restricted(&self, remap: &ColumnRemap) -> Self {
        Self {
            terms: remap.kept.iter().map(|&w| self.terms[w].clone()).collect(),
        }
    }
}

/// A loaded corpus together with its column bookkeeping.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub counts: CountMatrix,
    pub vocabulary: Option<Vocabulary>,
    pub remap: ColumnRemap,
}

fn open(path: &Path) -> Result<File, CorpusError> {
    File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a MatrixMarket `coordinate integer general` file (1-based indices).
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<LoadedCorpus, CorpusError> {
    read_matrix_market(BufReader::new(open(path.as_ref())?))
}

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<LoadedCorpus, CorpusError> {
    let mut lines = reader.lines().enumerate();

    let (header_no, header) = match lines.next() {
        Some((no, line)) => (no + 1, line.map_err(|e| parse_err(no + 1, e.to_string()))?),
        None => return Err(parse_err(1, "empty file")),
    };
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(header_no, "malformed MatrixMarket header"));
    }
    if tokens[2] != "coordinate" || tokens[3] != "integer" || tokens[4] != "general" {
        return Err(parse_err(
            header_no,
            format!(
                "unsupported format '{} {} {}', expected 'coordinate integer general'",
                tokens[2], tokens[3], tokens[4]
            ),
        ));
    }

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (no, line) in lines {
        let line_no = no + 1;
        let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(
                        line_no,
                        "size line must hold rows, columns, entries",
                    ));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(line_no, format!("invalid size '{s}'")))
                };
                dims = Some((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
                triplets.reserve(dims.map_or(0, |d| d.2));
            }
            Some((rows, cols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(line_no, "entry must hold row, column, value"));
                }
                let index = |s: &str, bound: usize, what: &str| -> Result<usize, CorpusError> {
                    let v = s
                        .parse::<usize>()
                        .map_err(|_| parse_err(line_no, format!("invalid {what} index '{s}'")))?;
                    if v == 0 || v > bound {
                        return Err(parse_err(
                            line_no,
                            format!("{what} index {v} out of range 1..={bound}"),
                        ));
                    }
                    Ok(v - 1)
                };
                let doc = index(fields[0], rows, "row")?;
                let word = index(fields[1], cols, "column")?;
                let value = fields[2].parse::<i64>().map_err(|_| {
                    parse_err(line_no, format!("non-integer value '{}'", fields[2]))
                })?;
                if value < 0 {
                    return Err(parse_err(line_no, format!("negative count {value}")));
                }
                let value = Count::try_from(value)
                    .map_err(|_| parse_err(line_no, format!("count {value} too large")))?;
                triplets.push((doc, word, value));
            }
        }
    }
    let (rows, cols, declared) = dims.ok_or_else(|| parse_err(header_no, "missing size line"))?;
    if triplets.len() != declared {
        log::warn!(
            "MatrixMarket size line declares {declared} entries, found {}",
            triplets.len()
        );
    }
    if triplets.is_empty() {
        return Err(CorpusError::NoObservations);
    }
    let (counts, remap) = CountMatrix::from_triplets(rows, cols, triplets)?;
    Ok(LoadedCorpus {
        counts,
        vocabulary: None,
        remap,
    })
}

pub fn write_matrix_market<W: Write>(mut out: W, matrix: &CountMatrix) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate integer general")?;
    writeln!(
        out,
        "{} {} {}",
        matrix.n_docs(),
        matrix.n_words(),
        matrix.nnz()
    )?;
    for (d, w, c) in matrix.triplets() {
        writeln!(out, "{} {} {}", d + 1, w + 1, c)?;
    }
    Ok(())
}

/// Reads `doc,word,count` triplets. Words are either all 0-based integers
/// or all strings; strings build the vocabulary in order of appearance.
pub fn load_triplets_csv(path: impl AsRef<Path>) -> Result<LoadedCorpus, CorpusError> {
    read_triplets_csv(open(path.as_ref())?)
}

enum WordColumn {
    Unknown,
    Numeric,
    Terms(HashMap<String, usize>, Vec<String>),
}

pub fn read_triplets_csv<R: Read>(reader: R) -> Result<LoadedCorpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["doc", "word", "count"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(parse_err(1, "header must be 'doc,word,count'"));
    }

    let mut column = WordColumn::Unknown;
    let mut triplets = Vec::new();
    let mut max_doc = 0usize;
    let mut max_word = 0usize;
    for (row_index, record) in rdr.records().enumerate() {
        let line = row_index + 2;
        let record = record?;
        if record.len() != 3 {
            return Err(parse_err(line, "expected 3 fields"));
        }
        let doc: usize = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid doc id '{}'", &record[0])))?;
        let count: i64 = record[2]
            .parse()
            .map_err(|_| parse_err(line, format!("non-integer count '{}'", &record[2])))?;
        if count < 0 {
            return Err(parse_err(
                line,
                format!("negative count {count} in row {}", row_index),
            ));
        }
        let count = Count::try_from(count)
            .map_err(|_| parse_err(line, format!("count {count} too large")))?;

        let raw = &record[1];
        let numeric = raw.parse::<usize>().ok();
        if let WordColumn::Unknown = column {
            column = match numeric {
                Some(_) => WordColumn::Numeric,
                None => WordColumn::Terms(HashMap::new(), Vec::new()),
            };
        }
        let word = match (&mut column, numeric) {
            (WordColumn::Numeric, Some(w)) => w,
            (WordColumn::Terms(index, terms), None) => {
                *index.entry(raw.to_string()).or_insert_with(|| {
                    terms.push(raw.to_string());
                    terms.len() - 1
                })
            }
            _ => return Err(parse_err(line, "word column mixes integer ids and strings")),
        };
        max_doc = max_doc.max(doc);
        max_word = max_word.max(word);
        triplets.push((doc, word, count));
    }
    if triplets.is_empty() {
        return Err(CorpusError::NoObservations);
    }
    let (counts, remap) = CountMatrix::from_triplets(max_doc + 1, max_word + 1, triplets)?;
    let vocabulary = match column {
        WordColumn::Terms(_, terms) => Some(Vocabulary::new(terms)?.restricted(&remap)),
        _ => None,
    };
    Ok(LoadedCorpus {
        counts,
        vocabulary,
        remap,
    })
}

pub fn write_triplets_csv<W: Write>(
    out: W,
    matrix: &CountMatrix,
    vocabulary: Option<&Vocabulary>,
) -> Result<(), CorpusError> {
    if let Some(v) = vocabulary {
        if v.len() != matrix.n_words() {
            return Err(CorpusError::VocabularySize {
                terms: v.len(),
                words: matrix.n_words(),
            });
        }
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["doc", "word", "count"])?;
    for (d, w, c) in matrix.triplets() {
        let word = match vocabulary {
            Some(v) => v.terms()[w].clone(),
            None => w.to_string(),
        };
        wtr.write_record([d.to_string(), word, c.to_string()])?;
    }
    wtr.flush().map_err(|e| CorpusError::Csv(e.into()))?;
    Ok(())
}

/// Reads a `doc,cluster` labels file with 0-based ids, ordered by doc.
pub fn load_labels_csv(path: impl AsRef<Path>) -> Result<Vec<usize>, CorpusError> {
    read_labels_csv(open(path.as_ref())?)
}

pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<usize>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "doc" || &headers[1] != "cluster" {
        return Err(parse_err(1, "header must be 'doc,cluster'"));
    }
    let mut pairs = Vec::new();
    for (row_index, record) in rdr.records().enumerate() {
        let line = row_index + 2;
        let record = record?;
        let doc: usize = record
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(line, "invalid doc id"))?;
        let cluster: usize = record
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(line, "invalid cluster id"))?;
        pairs.push((doc, cluster));
    }
    pairs.sort_unstable();
    for (i, &(doc, _)) in pairs.iter().enumerate() {
        if doc != i {
            return Err(parse_err(
                0,
                format!("labels must cover docs 0..{} exactly once", pairs.len()),
            ));
        }
    }
    Ok(pairs.into_iter().map(|(_, c)| c).collect())
}

pub fn write_labels_csv<W: Write>(out: W, labels: &[usize]) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["doc", "cluster"])?;
    for (d, c) in labels.iter().enumerate() {
        wtr.write_record([d.to_string(), c.to_string()])?;
    }
    wtr.flush().map_err(|e| CorpusError::Csv(e.into()))?;
    Ok(())
}

/// Cluster-level aggregated counts X̃_qv = Σ_i Y_iq x_iv, stored dense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaCorpus {
    n_clusters: usize,
    n_words: usize,
    counts: Vec<Count>,
    cluster_sizes: Vec<usize>,
}

/// Sums the rows of `x` within each cluster of `y`.
pub fn aggregate(x: &CountMatrix, y: &Partition) -> Result<MetaCorpus, CorpusError> {
    if y.len() != x.n_docs() {
        return Err(CorpusError::LengthMismatch {
            expected: x.n_docs(),
            found: y.len(),
        });
    }
    let q = y.n_clusters();
    let v = x.n_words();
    let mut counts = vec![0 as Count; q * v];
    for i in 0..x.n_docs() {
        let base = y.label(i) * v;
        let (words, cs) = x.row(i);
        for (&w, &c) in words.iter().zip(cs) {
            counts[base + w] += c;
        }
    }
    Ok(MetaCorpus {
        n_clusters: q,
        n_words: v,
        counts,
        cluster_sizes: y.sizes(),
    })
}

impl MetaCorpus {
    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_words(&self) -> usize {
        self.n_words
    }

    pub fn row(&self, q: usize) -> &[Count] {
        &self.counts[q * self.n_words..(q + 1) * self.n_words]
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    /// Nonzero word indices and counts of meta-observation `q`.
    pub fn sparse_row(&self, q: usize) -> (Vec<usize>, Vec<Count>) {
        sparse_from_dense(self.row(q))
    }

    /// Moves observation `i` of `x` from cluster `from` to cluster `to`.
    /// Only rows `from` and `to` change.
    pub fn move_document(&mut self, x: &CountMatrix, i: usize, from: usize, to: usize) {
        let v = self.n_words;
        let (words, cs) = x.row(i);
        for (&w, &c) in words.iter().zip(cs) {
            self.counts[from * v + w] -= c;
            self.counts[to * v + w] += c;
        }
        self.cluster_sizes[from] -= 1;
        self.cluster_sizes[to] += 1;
    }

    /// The meta-observations as an ordinary count matrix (one row per cluster).
    pub fn to_count_matrix(&self) -> Result<CountMatrix, CorpusError> {
        let triplets = (0..self.n_clusters).flat_map(|q| {
            self.row(q)
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(move |(w, &c)| (q, w, c))
        });
        let (m, _) = CountMatrix::from_triplets(self.n_clusters, self.n_words, triplets)?;
        Ok(m)
    }
}

pub(crate) fn sparse_from_dense(row: &[Count]) -> (Vec<usize>, Vec<Count>) {
    let mut words = Vec::new();
    let mut counts = Vec::new();
    for (w, &c) in row.iter().enumerate() {
        if c > 0 {
            words.push(w);
            counts.push(c);
        }
    }
    (words, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mm(text: &str) -> Result<LoadedCorpus, CorpusError> {
        read_matrix_market(text.as_bytes())
    }

    #[test]
    fn matrix_market_prunes_empty_columns() {
        let loaded =
            mm("%%MatrixMarket matrix coordinate integer general\n2 3 2\n1 1 2\n2 3 5\n").unwrap();
        let m = &loaded.counts;
        assert_eq!(m.n_docs(), 2);
        assert_eq!(m.n_words(), 2);
        assert_eq!(m.doc_lengths(), &[2, 5]);
        assert_eq!(loaded.remap.kept, vec![0, 2]);
        assert_eq!(m.to_dense(), vec![vec![2, 0], vec![0, 5]]);
    }

    #[test]
    fn matrix_market_sums_duplicates() {
        let loaded = mm(
            "%%MatrixMarket matrix coordinate integer general\n% comment\n1 1 2\n1 1 2\n1 1 3\n",
        )
        .unwrap();
        assert_eq!(loaded.counts.to_dense(), vec![vec![5]]);
    }

    #[test]
    fn matrix_market_errors() {
        let header = "%%MatrixMarket matrix coordinate integer general\n";
        assert!(matches!(
            mm(&format!("{header}2 2 0\n")),
            Err(CorpusError::NoObservations)
        ));
        assert!(matches!(
            mm("%%MatrixMarket matrix array real general\n1 1\n"),
            Err(CorpusError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            mm(&format!("{header}2 2 1\n1 1 2.5\n")),
            Err(CorpusError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            mm(&format!("{header}2 2 2\n1 1 1\n2 2 -3\n")),
            Err(CorpusError::Parse { line: 4, .. })
        ));
        assert!(matches!(
            mm(&format!("{header}2 2 1\n3 1 1\n")),
            Err(CorpusError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            mm(&format!("{header}2 2 1\n1 1 1\n")),
            Err(CorpusError::EmptyDocument { doc: 1 })
        ));
    }

    #[test]
    fn csv_with_terms() {
        let loaded = read_triplets_csv("doc,word,count\n0,cat,3\n1,dog,1\n".as_bytes()).unwrap();
        assert_eq!(loaded.counts.n_docs(), 2);
        assert_eq!(loaded.counts.n_words(), 2);
        assert_eq!(loaded.vocabulary.unwrap().terms(), &["cat", "dog"]);
    }

    #[test]
    fn csv_errors() {
        let err = read_triplets_csv("doc,word,count\n0,1,3\n1,0,-1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("row 1"));
        let err = read_triplets_csv("doc,word,count\n0,1,3\n1,dog,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 3, .. }));
        assert!(read_triplets_csv("d,w,c\n0,1,3\n".as_bytes()).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let mut buf = Vec::new();
        write_labels_csv(&mut buf, &[2, 0, 1, 1]).unwrap();
        assert_eq!(read_labels_csv(buf.as_slice()).unwrap(), vec![2, 0, 1, 1]);
        assert!(read_labels_csv("doc,cluster\n0,1\n2,1\n".as_bytes()).is_err());
    }

    #[test]
    fn aggregate_hand_example() {
        let (x, _) = CountMatrix::from_dense(&[vec![1, 0], vec![0, 2], vec![3, 0]]).unwrap();
        let y = Partition::new(vec![0, 1, 0], 2).unwrap();
        let meta = aggregate(&x, &y).unwrap();
        assert_eq!(meta.row(0), &[4, 0]);
        assert_eq!(meta.row(1), &[0, 2]);
        assert_eq!(meta.cluster_sizes(), &[2, 1]);
    }

    #[test]
    fn aggregate_single_cluster_is_column_sums() {
        let (x, _) =
            CountMatrix::from_dense(&[vec![1, 4, 0], vec![0, 2, 7], vec![3, 0, 1]]).unwrap();
        let y = Partition::new(vec![0; 3], 1).unwrap();
        let meta = aggregate(&x, &y).unwrap();
        let sums: Vec<Count> = x.column_sums().iter().map(|&s| s as Count).collect();
        assert_eq!(meta.row(0), sums.as_slice());
    }

    #[test]
    fn aggregate_length_mismatch() {
        let (x, _) = CountMatrix::from_dense(&[vec![1], vec![2]]).unwrap();
        let y = Partition::new(vec![0], 1).unwrap();
        assert!(matches!(
            aggregate(&x, &y),
            Err(CorpusError::LengthMismatch { .. })
        ));
    }

    fn random_dense(rng: &mut ChaCha8Rng, n: usize, v: usize) -> Vec<Vec<Count>> {
        (0..n)
            .map(|_| {
                let mut row: Vec<Count> = (0..v)
                    .map(|_| {
                        if rng.gen_bool(0.3) {
                            rng.gen_range(1..6)
                        } else {
                            0
                        }
                    })
                    .collect();
                row[rng.gen_range(0..v)] += 1;
                row
            })
            .collect()
    }

    #[test]
    fn aggregate_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut dense = random_dense(&mut rng, 50, 20);
        // keep every column alive so the dense and pruned shapes agree
        for (w, row) in dense.iter_mut().take(20).enumerate() {
            row[w] += 1;
        }
        let (x, _) = CountMatrix::from_dense(&dense).unwrap();
        let labels: Vec<usize> = (0..50).map(|_| rng.gen_range(0..4)).collect();
        let y = Partition::new(labels.clone(), 4).unwrap();
        let meta = aggregate(&x, &y).unwrap();
        for q in 0..4 {
            for v in 0..20 {
                let mut expected = 0;
                for i in 0..50 {
                    if labels[i] == q {
                        expected += dense[i][v];
                    }
                }
                assert_eq!(meta.row(q)[v], expected);
            }
        }
    }

    #[test]
    fn move_document_is_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut dense = random_dense(&mut rng, 12, 6);
        for (w, row) in dense.iter_mut().take(6).enumerate() {
            row[w] += 1;
        }
        let (x, _) = CountMatrix::from_dense(&dense).unwrap();
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let mut y = Partition::new(labels, 3).unwrap();
        let mut meta = aggregate(&x, &y).unwrap();
        let before = meta.clone();
        meta.move_document(&x, 4, 1, 2);
        y.set(4, 2);
        assert_eq!(meta, aggregate(&x, &y).unwrap());
        assert_eq!(meta.row(0), before.row(0));
        for v in 0..6 {
            assert_eq!(meta.row(1)[v] + dense[4][v], before.row(1)[v]);
            assert_eq!(meta.row(2)[v], before.row(2)[v] + dense[4][v]);
        }
    }

    #[test]
    fn csv_round_trip_synthetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut dense = random_dense(&mut rng, 400, 915);
        for w in 0..915 {
            dense[w % 400][w] += 1;
        }
        let (x, _) = CountMatrix::from_dense(&dense).unwrap();
        let vocab = Vocabulary::synthetic(x.n_words());

        let mut buf = Vec::new();
        write_triplets_csv(&mut buf, &x, None).unwrap();
        assert_eq!(read_triplets_csv(buf.as_slice()).unwrap().counts, x);

        let mut buf = Vec::new();
        write_triplets_csv(&mut buf, &x, Some(&vocab)).unwrap();
        let back = read_triplets_csv(buf.as_slice()).unwrap();
        // string vocabularies are numbered by first appearance, so compare by term
        let back_vocab = back.vocabulary.unwrap();
        let dense_back = back.counts.to_dense();
        for (d, row) in x.to_dense().iter().enumerate() {
            for (w, &c) in row.iter().enumerate() {
                let j = back_vocab
                    .terms()
                    .iter()
                    .position(|t| t == &vocab.terms()[w])
                    .unwrap();
                assert_eq!(dense_back[d][j], c);
            }
        }

        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &x).unwrap();
        assert_eq!(read_matrix_market(buf.as_slice()).unwrap().counts, x);
    }

    proptest! {
        #[test]
        fn mass_and_permutation(
            seed in 0u64..1000,
            n in 2usize..30,
            q in 1usize..5,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dense = random_dense(&mut rng, n, 8);
            let (x, _) = CountMatrix::from_dense(&dense).unwrap();
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..q)).collect();
            let y = Partition::new(labels, q).unwrap();
            let meta = aggregate(&x, &y).unwrap();
            let sums = x.column_sums();
            for v in 0..x.n_words() {
                let total: u64 = (0..q).map(|c| meta.row(c)[v] as u64).sum();
                prop_assert_eq!(total, sums[v]);
            }
            prop_assert_eq!(meta.cluster_sizes().iter().sum::<usize>(), n);

            let perm: Vec<usize> = (0..q).rev().collect();
            let permuted = aggregate(&x, &y.permuted(&perm)).unwrap();
            for c in 0..q {
                prop_assert_eq!(permuted.row(perm[c]), meta.row(c));
            }
        }
    }
}
