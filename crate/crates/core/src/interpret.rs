//! Explanations of trained string models: deletion masking, kernel stimuli and
//! encoding export.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokens::{self, token_text, PAD};
use crate::icc::{AbstractFilter, AbstractIntent};
use crate::linn::{LinkInput, LinnError, LinnModel};
use crate::tde::{Instantiation, Value};

/// Mask length used when none is given.
pub const DEFAULT_MASK_LEN: usize = 5;

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("{0} models have no flat rendering to mask")]
    UnsupportedInstantiation(Instantiation),
    #[error("{0} models have no convolution kernels")]
    NoKernels(Instantiation),
    #[error("rendering of {len} tokens is too short for a mask of {mask_len}")]
    RenderingTooShort { len: usize, mask_len: usize },
    #[error(transparent)]
    Model(#[from] LinnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskDelta {
    /// First deleted token.
    pub position: usize,
    /// Offset of that token in the rendered text.
    pub char_offset: usize,
    /// Original probability minus the probability with the window deleted.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskExplanation {
    pub rendering: String,
    pub filter_rendering: String,
    pub mask_len: usize,
    pub probability: f64,
    pub deltas: Vec<MaskDelta>,
}

impl MaskExplanation {
    /// The entry with the largest `|delta|`; the first one wins ties.
    pub fn strongest(&self) -> Option<&MaskDelta> {
        self.deltas
            .iter()
            .fold(None, |best: Option<&MaskDelta>, d| match best {
                Some(b) if b.delta.abs() >= d.delta.abs() => Some(b),
                _ => Some(d),
            })
    }

    /// Text of the intent rendering with every character shaded by the delta of
    /// the window starting there: red for drops, green for gains.
    pub fn ansi_preview(&self) -> String {
        let scale = self
            .deltas
            .iter()
            .map(|d| d.delta.abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut by_offset: HashMap<usize, f64> = HashMap::new();
        for d in &self.deltas {
            by_offset.insert(d.char_offset, d.delta);
        }
        let mut out = String::new();
        for (k, c) in self.rendering.chars().enumerate() {
            match by_offset.get(&k) {
                Some(&d) => {
                    let level = (d.abs() / scale * 255.0).round() as u8;
                    let (r, g) = if d >= 0.0 { (level, 0) } else { (0, level) };
                    out.push_str(&format!("\x1b[48;2;{r};{g};0m{c}\x1b[0m"));
                }
                None => out.push(c),
            }
        }
        out
    }
}

fn char_offsets(ids: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(ids.len());
    let mut at = 0;
    for &id in ids {
        offsets.push(at);
        at += token_text(id).chars().count();
    }
    offsets
}

fn flat_input(intent: &[usize], filter: &[usize]) -> LinkInput {
    LinkInput {
        intent: Value::string(&intent[..tokens::unpadded_len(intent)]),
        filter: Value::string(&filter[..tokens::unpadded_len(filter)]),
    }
}

/// Deletion masking over explicit token sequences. Trailing padding is ignored
/// by the model, so windows inside it produce a delta of exactly zero.
pub fn explain_tokens(
    model: &LinnModel,
    intent_ids: &[usize],
    filter_ids: &[usize],
    mask_len: usize,
) -> Result<MaskExplanation, InterpretError> {
    let inst = model.instantiation();
    if !inst.is_flat() {
        return Err(InterpretError::UnsupportedInstantiation(inst));
    }
    if mask_len == 0 || intent_ids.len() <= mask_len {
        return Err(InterpretError::RenderingTooShort {
            len: intent_ids.len(),
            mask_len,
        });
    }
    let probability = model.forward_input(&flat_input(intent_ids, filter_ids))?;
    let offsets = char_offsets(intent_ids);
    let mut deltas = Vec::with_capacity(intent_ids.len() - mask_len + 1);
    for position in 0..=intent_ids.len() - mask_len {
        let mut masked = intent_ids[..position].to_vec();
        masked.extend_from_slice(&intent_ids[position + mask_len..]);
        masked.resize(intent_ids.len(), PAD);
        let p = model.forward_input(&flat_input(&masked, filter_ids))?;
        deltas.push(MaskDelta {
            position,
            char_offset: offsets[position],
            delta: probability - p,
        });
    }
    Ok(MaskExplanation {
        rendering: tokens::tokens_text(intent_ids),
        filter_rendering: tokens::tokens_text(filter_ids),
        mask_len,
        probability,
        deltas,
    })
}

/// Deletes every window of `mask_len` tokens from the intent rendering in turn,
/// keeping the filter fixed, and records how the link probability changes.
pub fn explain_by_masking(
    model: &LinnModel,
    intent: &AbstractIntent,
    filter: &AbstractFilter,
    mask_len: usize,
) -> Result<MaskExplanation, InterpretError> {
    explain_tokens(
        model,
        &tokens::intent_tokens(intent),
        &tokens::filter_tokens(filter),
        mask_len,
    )
}

/// Which encoder's kernels to inspect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Intent,
    Filter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelStimulus {
    pub segment: String,
    pub activation: f64,
    /// Index of the source string and the window's first token.
    pub source: usize,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    /// `conv1d_size<size>:<index>`.
    pub kernel: String,
    pub size: usize,
    pub index: usize,
    pub top: Vec<KernelStimulus>,
}

pub fn kernel_name(size: usize, index: usize) -> String {
    format!("conv1d_size{size}:{index}")
}

/// The `k` strongest distinct segments of every convolution kernel over
/// `corpus`. Equal activations keep the earlier window.
pub fn top_kernel_activations(
    model: &LinnModel,
    side: Side,
    corpus: &[Vec<usize>],
    k: usize,
) -> Result<Vec<KernelReport>, InterpretError> {
    let encoder = match side {
        Side::Intent => model.intent_encoder(),
        Side::Filter => model.filter_encoder(),
    };
    let strings = encoder
        .string_encoder()
        .filter(|s| s.conv().is_some())
        .ok_or(InterpretError::NoKernels(model.instantiation()))?;
    let conv = strings.conv().expect("checked above");
    let ids = conv.kernel_ids();
    let mut reports: Vec<KernelReport> = ids
        .iter()
        .map(|&(size, index)| KernelReport {
            kernel: kernel_name(size, index),
            size,
            index,
            top: Vec::with_capacity(k + 1),
        })
        .collect();
    if k == 0 {
        return Ok(reports);
    }
    for (source, raw) in corpus.iter().enumerate() {
        let text = &raw[..tokens::unpadded_len(raw)];
        let acts = strings
            .conv_activations(model.store(), text)
            .map_err(LinnError::from)?
            .expect("convolutional encoder");
        let mut padded = text.to_vec();
        padded.resize(text.len().max(conv.max_size()), PAD);
        for (report, unit) in reports.iter_mut().zip(&acts) {
            for (position, &activation) in unit.iter().enumerate() {
                let top = &mut report.top;
                if top.len() == k && top[k - 1].activation >= activation {
                    continue;
                }
                let segment = tokens::tokens_text(&padded[position..position + report.size]);
                if top.iter().any(|s| s.segment == segment) {
                    continue;
                }
                let at = top.partition_point(|s| s.activation >= activation);
                top.insert(
                    at,
                    KernelStimulus {
                        segment,
                        activation,
                        source,
                        position,
                    },
                );
                top.truncate(k);
            }
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingRow {
    pub value: String,
    pub count: usize,
    pub encoding: Vec<f64>,
}

/// Intent encodings, one row per distinct value in first-seen order.
pub fn export_encodings(
    model: &LinnModel,
    values: &[AbstractIntent],
) -> Result<Vec<EncodingRow>, InterpretError> {
    let mut rows: Vec<EncodingRow> = Vec::new();
    let mut seen: HashMap<&AbstractIntent, usize> = HashMap::new();
    for v in values {
        if let Some(&k) = seen.get(v) {
            rows[k].count += 1;
            continue;
        }
        seen.insert(v, rows.len());
        rows.push(EncodingRow {
            value: v.render(),
            count: 1,
            encoding: model.encode_intent(v)?,
        });
    }
    Ok(rows)
}

/// CSV with a `value,count,e0,e1,...` header; floats use the shortest
/// representation that reads back to the same bits.
pub fn write_encodings_csv<W: Write>(out: W, rows: &[EncodingRow]) -> Result<(), InterpretError> {
    let mut w = csv::Writer::from_writer(out);
    let dim = rows.first().map_or(0, |r| r.encoding.len());
    let mut header = vec!["value".to_owned(), "count".to_owned()];
    header.extend((0..dim).map(|k| format!("e{k}")));
    w.write_record(&header)?;
    for r in rows {
        let mut record = vec![r.value.clone(), r.count.to_string()];
        record.extend(r.encoding.iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokens::{char_id, WILDCARD};
    use crate::tde::Hyper;

    fn link() -> (AbstractIntent, AbstractFilter) {
        (
            AbstractIntent::parse(Some("android.intent.action.send"), ["default"]).unwrap(),
            AbstractFilter::parse(["android.intent.action.send"], ["default"]).unwrap(),
        )
    }

    #[test]
    fn one_delta_per_window_and_model_untouched() {
        let m = LinnModel::new(Instantiation::StrCnn, Hyper::default(), 3).unwrap();
        let (i, f) = link();
        let before = m.forward(&i, &f).unwrap();
        let e = explain_by_masking(&m, &i, &f, 5).unwrap();
        let len = tokens::intent_tokens(&i).len();
        assert_eq!(e.deltas.len(), len - 5 + 1);
        assert_eq!(e.probability, before);
        assert_eq!(m.forward(&i, &f).unwrap(), before);
        assert_eq!(e.rendering, "a=android.intent.action.send;c=default");
        assert!(e.strongest().is_some());
        assert!(e.ansi_preview().contains("\x1b["));
    }

    #[test]
    fn masking_padding_changes_nothing() {
        let m = LinnModel::new(Instantiation::StrRnn, Hyper::default(), 3).unwrap();
        let (i, f) = link();
        let padded = tokens::render_intent_tokens(&i);
        let len = tokens::intent_tokens(&i).len();
        let e = explain_tokens(&m, &padded, &tokens::render_filter_tokens(&f), 5).unwrap();
        assert_eq!(e.deltas.len(), tokens::MAX_LEN - 4);
        for d in &e.deltas[len..] {
            assert_eq!(d.delta, 0.0, "position {}", d.position);
        }
    }

    #[test]
    fn typed_models_are_rejected() {
        let m = LinnModel::new(Instantiation::TypedSimple, Hyper::default(), 3).unwrap();
        let (i, f) = link();
        assert!(matches!(
            explain_by_masking(&m, &i, &f, 5),
            Err(InterpretError::UnsupportedInstantiation(
                Instantiation::TypedSimple
            ))
        ));
        let rnn = LinnModel::new(Instantiation::StrRnn, Hyper::default(), 3).unwrap();
        assert!(matches!(
            top_kernel_activations(&rnn, Side::Intent, &[], 1),
            Err(InterpretError::NoKernels(Instantiation::StrRnn))
        ));
    }

    #[test]
    fn single_window_string_is_its_own_top_stimulus() {
        let m = LinnModel::new(Instantiation::StrCnn, Hyper::default(), 3).unwrap();
        let ids: Vec<usize> = "abcdefg".chars().map(char_id).collect();
        let reports = top_kernel_activations(&m, Side::Intent, &[ids], 1).unwrap();
        assert_eq!(reports.len(), 120);
        let seven = reports.iter().find(|r| r.size == 7).unwrap();
        assert_eq!(seven.kernel, "conv1d_size7:0");
        assert_eq!(seven.top[0].segment, "abcdefg");
    }

    #[test]
    fn wildcard_stencil_ranks_wildcards_first() {
        let mut m = LinnModel::new(Instantiation::StrCnn, Hyper::default(), 3).unwrap();
        let strings = m.intent_encoder().string_encoder().unwrap().clone();
        let table = strings.embedding().table();
        let conv = strings.conv().unwrap().clone();
        let store = m.store_mut();
        // one-hot embedding for the wildcard id only
        let t = store.get_mut(table).data_mut();
        t.fill(0.0);
        t[WILDCARD] = 1.0;
        // size-1 kernel 0 reads that coordinate
        let w = store.find("intent.str.conv.size1.weight").unwrap();
        store.get_mut(w).data_mut().fill(0.0);
        store.get_mut(w).data_mut()[0] = 1.0;
        assert_eq!(conv.kernel_ids()[0], (1, 0));
        let corpus: Vec<Vec<usize>> = ["a=send", "a=(.*)d", "a=v(.*)w(.*)"]
            .iter()
            .map(|s| tokens::pattern_tokens(&crate::pattern::parse_pattern(s).unwrap()))
            .collect();
        let reports = top_kernel_activations(&m, Side::Intent, &corpus, 3).unwrap();
        let top = &reports[0].top;
        assert_eq!(top[0].segment, "(.*)", "{top:?}");
        assert_eq!((top[0].source, top[0].position), (1, 2));
        assert!(top[0].activation > 0.0);
        assert!(top[1..].iter().all(|s| s.activation == 0.0));
        assert_eq!(top.len(), 3);
    }

    #[test]
    fn export_groups_duplicates() {
        let m = LinnModel::new(Instantiation::TypedSimple, Hyper::default(), 3).unwrap();
        let (i, _) = link();
        let other = AbstractIntent::parse(None, ["default"]).unwrap();
        let rows = export_encodings(&m, &[i.clone(), other, i]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].count, 2);
        assert_eq!(rows[0].encoding.len(), 64);
        let mut buf = Vec::new();
        write_encodings_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("value,count,e0,e1"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 2 + 64);
        let back: f64 = first[2].parse().unwrap();
        assert_eq!(back.to_bits(), rows[0].encoding[0].to_bits());
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[2.0, 0.0]), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]), 0.0);
        assert_eq!(cosine_similarity(&[0.0], &[1.0]), 0.0);
    }
}
