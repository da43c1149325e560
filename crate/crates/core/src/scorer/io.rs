//! Scorer file formats: the versioned model dump, the ingested-backbone TSV,
//! and the external-feature TSV.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use crate::corpus::SentenceId;
use crate::error::{data_err, Error, Result};
use crate::linalg::Mat;

use super::{Backbone, ExternalFeatures, IngestedVectors, LookupBackbone, MaskMode, ScorerParams};

const MAGIC: &str = "scorer-tsv 1";

fn write_floats<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            write!(out, "\t")?;
        }
        write!(out, "{v}")?;
        first = false;
    }
    writeln!(out)?;
    Ok(())
}

/// Dump every matrix with a header (dim, hidden, ext_dim, backbone mode).
/// Ingested vectors are an input artifact and are not serialized.
pub fn save_scorer<W: Write>(out: &mut W, params: &ScorerParams) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "dim\t{}", params.dim)?;
    writeln!(out, "hidden\t{}", params.hidden)?;
    writeln!(out, "ext_dim\t{}", params.ext_dim)?;
    writeln!(out, "max_len\t{}", params.max_len)?;
    writeln!(out, "mask_mode\t{}", params.mask_mode.name())?;
    let mode = match &params.backbone {
        Backbone::Lookup(_) => "lookup",
        Backbone::Ingested(_) => "ingested",
    };
    writeln!(out, "backbone\t{mode}")?;
    writeln!(out, "attn")?;
    for i in 0..params.attn.rows {
        write_floats(out, params.attn.row(i))?;
    }
    writeln!(out, "w_hidden")?;
    for i in 0..params.w_hidden.rows {
        write_floats(out, params.w_hidden.row(i))?;
    }
    writeln!(out, "b_hidden")?;
    write_floats(out, &params.b_hidden)?;
    writeln!(out, "w_out")?;
    write_floats(out, &params.w_out)?;
    writeln!(out, "b_out")?;
    write_floats(out, &[params.b_out])?;
    if let Backbone::Lookup(b) = &params.backbone {
        writeln!(out, "vocab\t{}", b.vocab.len())?;
        let mut by_row: Vec<(&String, &usize)> = b.vocab.iter().collect();
        by_row.sort_by_key(|(_, &row)| row);
        for (token, &row) in by_row {
            write!(out, "{token}\t")?;
            write_floats(out, b.vectors.row(row))?;
        }
        write!(out, "<unk>\t")?;
        write_floats(out, b.vectors.row(b.unk_row()))?;
    }
    Ok(())
}

struct Lines<R: BufRead> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => data_err(format!("model file truncated at line {}", self.line_no)),
        }
    }

    fn expect_header(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        let (k, v) = line
            .split_once('\t')
            .ok_or_else(|| Error::Data(format!("expected `{key}` header, got {line:?}")))?;
        if k != key {
            return data_err(format!("expected `{key}` header, got {k:?}"));
        }
        Ok(v.to_string())
    }

    fn expect_section(&mut self, name: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != name {
            return data_err(format!("expected `{name}` section, got {line:?}"));
        }
        Ok(())
    }

    fn floats(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let values: Vec<f64> = line
            .split('\t')
            .map(|t| t.parse::<f64>().map_err(|_| Error::Data(format!("bad float {t:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != expected {
            return data_err(format!(
                "expected {expected} floats, got {} at line {}",
                values.len(),
                self.line_no
            ));
        }
        Ok(values)
    }
}

/// Load a model dump. A model saved in ingested mode needs its vectors
/// supplied here (they live in a separate input file).
pub fn load_scorer<R: BufRead>(reader: R, ingested: Option<IngestedVectors>) -> Result<ScorerParams> {
    let mut lines = Lines {
        inner: reader.lines(),
        line_no: 0,
    };
    let magic = lines.next_line()?;
    if magic != MAGIC {
        return data_err(format!("unrecognized model header {magic:?}"));
    }
    let parse_usize = |s: String| -> Result<usize> {
        s.parse().map_err(|_| Error::Data(format!("bad integer {s:?}")))
    };
    let dim = parse_usize(lines.expect_header("dim")?)?;
    let hidden = parse_usize(lines.expect_header("hidden")?)?;
    let ext_dim = parse_usize(lines.expect_header("ext_dim")?)?;
    let max_len = parse_usize(lines.expect_header("max_len")?)?;
    let mask_mode = MaskMode::parse(&lines.expect_header("mask_mode")?)?;
    let backbone_mode = lines.expect_header("backbone")?;

    lines.expect_section("attn")?;
    let mut attn = Mat::zeros(dim, dim);
    for i in 0..dim {
        let row = lines.floats(dim)?;
        attn.data[i * dim..(i + 1) * dim].copy_from_slice(&row);
    }
    lines.expect_section("w_hidden")?;
    let mut w_hidden = Mat::zeros(hidden, dim + ext_dim);
    for i in 0..hidden {
        let row = lines.floats(dim + ext_dim)?;
        w_hidden.data[i * (dim + ext_dim)..(i + 1) * (dim + ext_dim)].copy_from_slice(&row);
    }
    lines.expect_section("b_hidden")?;
    let b_hidden = lines.floats(hidden)?;
    lines.expect_section("w_out")?;
    let w_out = lines.floats(hidden)?;
    lines.expect_section("b_out")?;
    let b_out = lines.floats(1)?[0];

    let backbone = match backbone_mode.as_str() {
        "lookup" => {
            let n = parse_usize(lines.expect_header("vocab")?)?;
            let mut vocab = BTreeMap::new();
            let mut vectors = Mat::zeros(n + 1, dim);
            for row in 0..=n {
                let line = lines.next_line()?;
                let (token, rest) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::Data("bad vocab row".to_string()))?;
                let values: Vec<f64> = rest
                    .split('\t')
                    .map(|t| t.parse::<f64>().map_err(|_| Error::Data(format!("bad float {t:?}"))))
                    .collect::<Result<_>>()?;
                if values.len() != dim {
                    return data_err("vocab vector dimension mismatch");
                }
                vectors.data[row * dim..(row + 1) * dim].copy_from_slice(&values);
                if row < n {
                    if vocab.insert(token.to_string(), row).is_some() {
                        return data_err(format!("duplicate vocab token {token:?}"));
                    }
                } else if token != "<unk>" {
                    return data_err("last vocab row must be <unk>");
                }
            }
            Backbone::Lookup(LookupBackbone { dim, vocab, vectors })
        }
        "ingested" => {
            let vectors = ingested.ok_or_else(|| {
                Error::Config("model uses an ingested backbone; supply the vectors file".to_string())
            })?;
            if vectors.dim != dim {
                return data_err(format!(
                    "ingested vectors have dim {}, model expects {dim}",
                    vectors.dim
                ));
            }
            Backbone::Ingested(vectors)
        }
        other => return data_err(format!("unknown backbone mode {other:?}")),
    };

    let params = ScorerParams {
        dim,
        hidden,
        ext_dim,
        max_len,
        mask_mode,
        attn,
        w_hidden,
        b_hidden,
        w_out,
        b_out,
        backbone,
    };
    params.check_shapes()?;
    Ok(params)
}

/// Ingested-backbone TSV: sentence_id, position, then the d vector entries.
/// Every position of a sentence must be present exactly once.
pub fn read_ingested_tsv<R: BufRead>(reader: R) -> Result<IngestedVectors> {
    let mut rows: HashMap<SentenceId, Vec<(usize, Vec<f64>)>> = HashMap::new();
    let mut dim = None;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id: SentenceId = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Data(format!("ingested tsv line {}: bad sentence id", line_no + 1)))?;
        let pos: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Data(format!("ingested tsv line {}: bad position", line_no + 1)))?;
        let vector: Vec<f64> = fields
            .map(|t| t.parse::<f64>().map_err(|_| Error::Data(format!("bad float {t:?}"))))
            .collect::<Result<_>>()?;
        if vector.is_empty() {
            return data_err(format!("ingested tsv line {}: empty vector", line_no + 1));
        }
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return data_err(format!("ingested tsv line {}: dimension mismatch", line_no + 1))
            }
            _ => {}
        }
        rows.entry(id).or_default().push((pos, vector));
    }
    let dim = dim.ok_or_else(|| Error::Data("ingested tsv is empty".to_string()))?;
    let mut by_sentence = HashMap::with_capacity(rows.len());
    for (id, mut entries) in rows {
        entries.sort_by_key(|(pos, _)| *pos);
        for (want, (pos, _)) in entries.iter().enumerate() {
            if *pos != want {
                return data_err(format!(
                    "ingested vectors for sentence {id}: positions must cover 0..len exactly once"
                ));
            }
        }
        by_sentence.insert(id, entries.into_iter().map(|(_, v)| v).collect());
    }
    Ok(IngestedVectors { dim, by_sentence })
}

/// External-feature TSV: sentence_id, then a fixed-length feature vector.
pub fn read_external_features_tsv<R: BufRead>(reader: R) -> Result<ExternalFeatures> {
    let mut by_sentence = HashMap::new();
    let mut dim = None;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id: SentenceId = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Data(format!("features tsv line {}: bad sentence id", line_no + 1)))?;
        let vector: Vec<f64> = fields
            .map(|t| t.parse::<f64>().map_err(|_| Error::Data(format!("bad float {t:?}"))))
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return data_err(format!("features tsv line {}: uneven feature length", line_no + 1))
            }
            _ => {}
        }
        if by_sentence.insert(id, vector).is_some() {
            return data_err(format!("duplicate feature row for sentence {id}"));
        }
    }
    let dim = dim.ok_or_else(|| Error::Data("features tsv is empty".to_string()))?;
    Ok(ExternalFeatures { dim, by_sentence })
}
