//! Aggregation of exported human judgments into score tables.
//!
//! Answers are on a 0–2 scale (no, partially, yes). Q1 asks for coherence,
//! Q2 for topic consistency and Q3–Q6 for the economic, legality, policy and
//! crime frames; the framing score of a record is its answer to the question
//! of its target frame.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::metrics::{fmt2, harmonic_mean};
use crate::strategy::enumerate_variants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Topic,
    Coherence,
    Framing,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Topic, Dimension::Coherence, Dimension::Framing];

    pub fn short(self) -> &'static str {
        match self {
            Dimension::Topic => "topic",
            Dimension::Coherence => "coh.",
            Dimension::Framing => "fram.",
        }
    }
}

/// Question number (1-based) holding the framing judgment for `frame`.
pub fn framing_question(frame: Frame) -> usize {
    3 + frame.index()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub instance_id: String,
    pub variant: String,
    pub source_frame: Frame,
    pub target_frame: Frame,
    pub worker_id: String,
    /// Q1..Q6; `None` where the question was not asked.
    pub answers: [Option<u8>; 6],
}

impl AnnotationRecord {
    pub fn is_intra_frame(&self) -> bool {
        self.source_frame == self.target_frame
    }

    pub fn answer(&self, question: usize) -> Option<u8> {
        self.answers
            .get(question.checked_sub(1)?)
            .copied()
            .flatten()
    }

    pub fn score(&self, dimension: Dimension) -> Option<u8> {
        match dimension {
            Dimension::Coherence => self.answer(1),
            Dimension::Topic => self.answer(2),
            Dimension::Framing => self.answer(framing_question(self.target_frame)),
        }
    }

    fn require(&self, dimension: Dimension) -> Result<u8> {
        self.score(dimension).ok_or_else(|| Error::Annotation {
            id: self.instance_id.clone(),
            message: match dimension {
                Dimension::Framing => format!(
                    "worker {} gave no answer to q{} for target frame {}",
                    self.worker_id,
                    framing_question(self.target_frame),
                    self.target_frame
                ),
                d => format!("worker {} gave no {d:?} answer", self.worker_id).to_lowercase(),
            },
        })
    }
}

#[derive(Deserialize)]
struct CsvRow {
    instance_id: String,
    variant: String,
    source_frame: String,
    target_frame: String,
    worker_id: String,
    q1: Option<String>,
    q2: Option<String>,
    q3: Option<String>,
    q4: Option<String>,
    q5: Option<String>,
    q6: Option<String>,
}

/// Parses the flat CSV export: `instance_id,variant,source_frame,
/// target_frame,worker_id,q1..q6`. Empty answer cells mean "not asked".
pub fn parse_annotations(file: &str, raw: &str) -> Result<Vec<AnnotationRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());
    let mut out = Vec::new();
    for (n, row) in reader.deserialize::<CsvRow>().enumerate() {
        let key = format!("row {}", n + 1);
        let row = row.map_err(|e| Error::parse(file, &key, e))?;
        let frame = |s: &str| s.parse::<Frame>().map_err(|e| Error::parse(file, &key, e));
        let qs = [&row.q1, &row.q2, &row.q3, &row.q4, &row.q5, &row.q6];
        let mut answers = [None; 6];
        for (i, q) in qs.into_iter().enumerate() {
            answers[i] = match q.as_deref().map(str::trim) {
                None | Some("") => None,
                Some(v) => match v.parse::<u8>() {
                    Ok(a) if a <= 2 => Some(a),
                    _ => {
                        return Err(Error::Annotation {
                            id: row.instance_id.clone(),
                            message: format!("q{} answer `{v}` is not 0, 1 or 2", i + 1),
                        })
                    }
                },
            };
        }
        out.push(AnnotationRecord {
            source_frame: frame(&row.source_frame)?,
            target_frame: frame(&row.target_frame)?,
            instance_id: row.instance_id,
            variant: row.variant,
            worker_id: row.worker_id,
            answers,
        });
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&path.display().to_string(), &raw)
}

/// Running mean over integer answers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Mean {
    pub sum: u64,
    pub n: u64,
}

impl Mean {
    pub fn push(&mut self, v: u8) {
        self.sum += u64::from(v);
        self.n += 1;
    }

    pub fn value(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum as f64 / self.n as f64)
    }
}

fn mean_of(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Table order: the eight strategy variants first, anything else by name.
fn variant_order(name: &str) -> (usize, String) {
    let pos = enumerate_variants().iter().position(|v| v.name() == name);
    (pos.unwrap_or(usize::MAX), name.to_owned())
}

fn sorted_variants<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<String> = names
        .into_iter()
        .map(str::to_owned)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    v.sort_by_key(|n| variant_order(n));
    v
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DimensionMeans {
    pub topic: Mean,
    pub coherence: Mean,
    pub framing: Mean,
}

impl DimensionMeans {
    pub fn get(&self, d: Dimension) -> Mean {
        match d {
            Dimension::Topic => self.topic,
            Dimension::Coherence => self.coherence,
            Dimension::Framing => self.framing,
        }
    }

    /// Mean of the three dimension means.
    pub fn avg(&self) -> Option<f64> {
        let vals: Option<Vec<f64>> = Dimension::ALL
            .iter()
            .map(|d| self.get(*d).value())
            .collect();
        mean_of(vals?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub intra: DimensionMeans,
    pub inter: DimensionMeans,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: BTreeMap<String, ScoreRow>,
}

impl ScoreTable {
    pub fn variants(&self) -> Vec<String> {
        sorted_variants(self.rows.keys().map(String::as_str))
    }
}

/// Per-variant means of the three dimensions, split into intra- and
/// inter-frame generation.
pub fn aggregate_scores(records: &[AnnotationRecord]) -> Result<ScoreTable> {
    let mut table = ScoreTable::default();
    for r in records {
        let (topic, coherence, framing) = (
            r.require(Dimension::Topic)?,
            r.require(Dimension::Coherence)?,
            r.require(Dimension::Framing)?,
        );
        let row = table.rows.entry(r.variant.clone()).or_default();
        let block = if r.is_intra_frame() {
            &mut row.intra
        } else {
            &mut row.inter
        };
        block.topic.push(topic);
        block.coherence.push(coherence);
        block.framing.push(framing);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Mean share of workers agreeing with the majority answer, in [0, 1].
    pub mean: f64,
    pub items: usize,
    /// Items judged by fewer than two workers.
    pub skipped: usize,
}

/// Agreement with the majority per (instance, variant, target frame,
/// question). A tie counts the largest share.
pub fn majority_agreement(records: &[AnnotationRecord]) -> Agreement {
    let mut items: BTreeMap<(&str, &str, Frame, usize), [usize; 3]> = BTreeMap::new();
    for r in records {
        for q in 1..=6 {
            if let Some(a) = r.answer(q) {
                items
                    .entry((&r.instance_id, &r.variant, r.target_frame, q))
                    .or_default()[usize::from(a)] += 1;
            }
        }
    }
    let mut shares = Vec::new();
    let mut skipped = 0;
    for counts in items.values() {
        let n: usize = counts.iter().sum();
        if n < 2 {
            skipped += 1;
            continue;
        }
        shares.push(*counts.iter().max().unwrap_or(&0) as f64 / n as f64);
    }
    Agreement {
        mean: mean_of(shares.iter().copied()).unwrap_or(0.0),
        items: shares.len(),
        skipped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionMatrix {
    pub dimension: Dimension,
    /// `cells[source][target]`; the diagonal stays empty.
    pub cells: [[Mean; 4]; 4],
}

impl DirectionMatrix {
    pub fn cell(&self, source: Frame, target: Frame) -> Option<f64> {
        self.cells[source.index()][target.index()].value()
    }

    pub fn row_avg(&self, source: Frame) -> Option<f64> {
        mean_of(Frame::ALL.iter().filter_map(|t| self.cell(source, *t)))
    }

    pub fn col_avg(&self, target: Frame) -> Option<f64> {
        mean_of(Frame::ALL.iter().filter_map(|s| self.cell(*s, target)))
    }

    pub fn overall_avg(&self) -> Option<f64> {
        mean_of(
            Frame::ALL
                .iter()
                .flat_map(|s| Frame::ALL.iter().filter_map(move |t| self.cell(*s, *t))),
        )
    }

    pub fn total_count(&self) -> u64 {
        self.cells.iter().flatten().map(|m| m.n).sum()
    }
}

/// Source-by-target means over inter-frame records. Records lacking the
/// dimension's answer are rejected.
pub fn direction_matrix(
    records: &[AnnotationRecord],
    dimension: Dimension,
) -> Result<DirectionMatrix> {
    let mut cells = [[Mean::default(); 4]; 4];
    for r in records.iter().filter(|r| !r.is_intra_frame()) {
        cells[r.source_frame.index()][r.target_frame.index()].push(r.require(dimension)?);
    }
    Ok(DirectionMatrix { dimension, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotRow {
    pub variant: String,
    pub coherence: f64,
    pub framing: f64,
    /// Per worker: (coherence rank, framing rank).
    pub ranks: BTreeMap<String, (usize, usize)>,
}

impl PilotRow {
    pub fn balance(&self) -> Result<f64> {
        harmonic_mean(self.coherence, self.framing)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub coherence: Vec<String>,
    pub framing: Vec<String>,
    pub balance: Vec<String>,
}

const TIE_EPS: f64 = 1e-12;

fn argmax_all(rows: &[PilotRow], key: impl Fn(&PilotRow) -> Result<f64>) -> Result<Vec<String>> {
    let scored: Vec<(f64, &str)> = rows
        .iter()
        .map(|r| Ok((key(r)?, r.variant.as_str())))
        .collect::<Result<_>>()?;
    let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(scored
        .iter()
        .filter(|(s, _)| (best - s).abs() <= TIE_EPS)
        .map(|(_, v)| (*v).to_owned())
        .collect())
}

/// Best variant by coherence, by framing and by their harmonic mean; ties
/// list every tied variant in table order.
pub fn select_models(rows: &[PilotRow]) -> Result<ModelSelection> {
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(ModelSelection {
        coherence: argmax_all(rows, |r| Ok(r.coherence))?,
        framing: argmax_all(rows, |r| Ok(r.framing))?,
        balance: argmax_all(rows, PilotRow::balance)?,
    })
}

/// Competition ranking, highest score first: equal scores share a rank and
/// the next rank skips accordingly (1, 2, 2, 2, 5).
pub fn competition_ranks(scores: &[f64]) -> Vec<usize> {
    scores
        .iter()
        .map(|s| 1 + scores.iter().filter(|o| **o > s + TIE_EPS).count())
        .collect()
}

/// Pilot rows from judgments: averages over all workers, plus each
/// worker's rank of every variant by that worker's own means.
pub fn pilot_rows(records: &[AnnotationRecord]) -> Result<Vec<PilotRow>> {
    let mut overall: BTreeMap<&str, (Mean, Mean)> = BTreeMap::new();
    let mut per_worker: BTreeMap<&str, BTreeMap<&str, (Mean, Mean)>> = BTreeMap::new();
    for r in records {
        let (c, f) = (
            r.require(Dimension::Coherence)?,
            r.require(Dimension::Framing)?,
        );
        for slot in [
            overall.entry(&r.variant).or_default(),
            per_worker
                .entry(&r.worker_id)
                .or_default()
                .entry(&r.variant)
                .or_default(),
        ] {
            slot.0.push(c);
            slot.1.push(f);
        }
    }
    let variants = sorted_variants(overall.keys().copied());
    let mut rows: Vec<PilotRow> = variants
        .iter()
        .map(|v| {
            let (c, f) = overall[v.as_str()];
            PilotRow {
                variant: v.clone(),
                coherence: c.value().unwrap_or(0.0),
                framing: f.value().unwrap_or(0.0),
                ranks: BTreeMap::new(),
            }
        })
        .collect();
    for (worker, means) in &per_worker {
        let judged: Vec<usize> = (0..rows.len())
            .filter(|i| means.contains_key(variants[*i].as_str()))
            .collect();
        let coh: Vec<f64> = judged
            .iter()
            .map(|i| means[variants[*i].as_str()].0.value().unwrap_or(0.0))
            .collect();
        let fra: Vec<f64> = judged
            .iter()
            .map(|i| means[variants[*i].as_str()].1.value().unwrap_or(0.0))
            .collect();
        for ((i, rc), rf) in judged
            .iter()
            .zip(competition_ranks(&coh))
            .zip(competition_ranks(&fra))
        {
            rows[*i].ranks.insert((*worker).to_owned(), (rc, rf));
        }
    }
    Ok(rows)
}

fn opt2(v: Option<f64>) -> String {
    v.map_or_else(|| "–".to_owned(), fmt2)
}

fn raw(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

/// Pilot table: per-worker ranks and averages for coherence and framing,
/// the harmonic mean, then the three selections.
pub fn render_pilot(rows: &[PilotRow]) -> Result<String> {
    let selection = select_models(rows)?;
    let workers: Vec<&String> = rows
        .iter()
        .flat_map(|r| r.ranks.keys())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = String::from("# Pilot ranking\n\n");
    let mut header = String::from("| Strategy |");
    let mut rule = String::from("|---|");
    for dim in ["Coherence", "Framing"] {
        for w in &workers {
            let _ = write!(header, " {dim} {w} |");
            rule.push_str("---:|");
        }
        let _ = write!(header, " {dim} Avg. |");
        rule.push_str("---:|");
    }
    header.push_str(" H. Mean |");
    rule.push_str("---:|");
    let _ = writeln!(out, "{header}\n{rule}");
    for r in rows {
        let mut line = format!("| {} |", r.variant);
        for (pick, avg) in [(0, r.coherence), (1, r.framing)] {
            for w in &workers {
                let rank = r.ranks.get(*w).map_or("–".to_owned(), |x| {
                    (if pick == 0 { x.0 } else { x.1 }).to_string()
                });
                let _ = write!(line, " {rank} |");
            }
            let _ = write!(line, " {} |", fmt2(avg));
        }
        let _ = write!(line, " {} |", fmt2(r.balance()?));
        let _ = writeln!(out, "{line}");
    }
    let best = |names: &[String], key: &dyn Fn(&PilotRow) -> Result<f64>| -> Result<String> {
        let row = rows
            .iter()
            .find(|r| r.variant == names[0])
            .ok_or(Error::EmptyTable)?;
        Ok(format!("{} ({})", names.join(", "), fmt2(key(row)?)))
    };
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "- B.Coherence: {}",
        best(&selection.coherence, &|r| Ok(r.coherence))?
    );
    let _ = writeln!(
        out,
        "- B.Framing: {}",
        best(&selection.framing, &|r| Ok(r.framing))?
    );
    let _ = writeln!(
        out,
        "- B.Balance: {}",
        best(&selection.balance, &PilotRow::balance)?
    );
    Ok(out)
}

pub fn render_pilot_tsv(rows: &[PilotRow]) -> Result<String> {
    let mut out = String::from("variant\tcoherence\tframing\tharmonic_mean\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}",
            r.variant,
            r.coherence,
            r.framing,
            r.balance()?
        );
    }
    Ok(out)
}

/// Intra- and inter-frame blocks of topic, coherence, framing and average.
pub fn render_crowd(table: &ScoreTable, agreement: &Agreement) -> String {
    let mut out = String::from("# Manual evaluation\n\n");
    out.push_str("| Approach | Intra topic | Intra coh. | Intra fram. | Intra avg | Inter topic | Inter coh. | Inter fram. | Inter avg |\n");
    out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|---:|\n");
    for v in table.variants() {
        let row = &table.rows[&v];
        let mut line = format!("| {v} |");
        for block in [&row.intra, &row.inter] {
            for d in Dimension::ALL {
                let _ = write!(line, " {} |", opt2(block.get(d).value()));
            }
            let _ = write!(line, " {} |", opt2(block.avg()));
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(
        out,
        "\nMajority agreement: {}% over {} items ({} single-judgment items skipped)",
        fmt2(agreement.mean * 100.0),
        agreement.items,
        agreement.skipped
    );
    out
}

pub fn render_crowd_tsv(table: &ScoreTable) -> String {
    let mut out = String::from("variant\tblock\ttopic\tcoherence\tframing\tavg\tn\n");
    for v in table.variants() {
        let row = &table.rows[&v];
        for (name, block) in [("intra", &row.intra), ("inter", &row.inter)] {
            let _ = writeln!(
                out,
                "{v}\t{name}\t{}\t{}\t{}\t{}\t{}",
                raw(block.topic.value()),
                raw(block.coherence.value()),
                raw(block.framing.value()),
                raw(block.avg()),
                block.coherence.n
            );
        }
    }
    out
}

/// Source frames as rows, target frames as columns, averages appended.
pub fn render_direction_matrix(m: &DirectionMatrix) -> String {
    let mut out = String::from("| s2 | e | l | p | c | avg |\n|---|---:|---:|---:|---:|---:|\n");
    for s in Frame::ALL {
        let mut line = format!("| {} |", s.code());
        for t in Frame::ALL {
            let cell = if s == t {
                "–".to_owned()
            } else {
                opt2(m.cell(s, t))
            };
            let _ = write!(line, " {cell} |");
        }
        let _ = writeln!(out, "{line} {} |", opt2(m.row_avg(s)));
    }
    let mut line = String::from("| avg |");
    for t in Frame::ALL {
        let _ = write!(line, " {} |", opt2(m.col_avg(t)));
    }
    let _ = writeln!(out, "{line} {} |", opt2(m.overall_avg()));
    out
}

/// Coherence and framing direction matrices for every variant.
pub fn render_directions(records: &[AnnotationRecord]) -> Result<(String, String)> {
    let mut md = String::from("# Reframing directions\n");
    let mut tsv = String::from("variant\tdimension\tsource\ttarget\tmean\tn\n");
    for v in sorted_variants(records.iter().map(|r| r.variant.as_str())) {
        let subset: Vec<AnnotationRecord> =
            records.iter().filter(|r| r.variant == v).cloned().collect();
        for dim in [Dimension::Coherence, Dimension::Framing] {
            let m = direction_matrix(&subset, dim)?;
            let _ = writeln!(md, "\n## {v}: {dim:?}\n");
            md.push_str(&render_direction_matrix(&m));
            for s in Frame::ALL {
                for t in Frame::ALL.into_iter().filter(|t| *t != s) {
                    let cell = m.cells[s.index()][t.index()];
                    let _ = writeln!(
                        tsv,
                        "{v}\t{}\t{s}\t{t}\t{}\t{}",
                        dim.short().trim_end_matches('.'),
                        raw(cell.value()),
                        cell.n
                    );
                }
            }
        }
    }
    Ok((md, tsv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(
        id: &str,
        variant: &str,
        src: Frame,
        tgt: Frame,
        worker: &str,
        answers: [Option<u8>; 6],
    ) -> AnnotationRecord {
        AnnotationRecord {
            instance_id: id.into(),
            variant: variant.into(),
            source_frame: src,
            target_frame: tgt,
            worker_id: worker.into(),
            answers,
        }
    }

    fn full(q1: u8, q2: u8, fr: u8, tgt: Frame) -> [Option<u8>; 6] {
        let mut a = [Some(0); 6];
        a[0] = Some(q1);
        a[1] = Some(q2);
        a[framing_question(tgt) - 1] = Some(fr);
        a
    }

    #[test]
    fn parses_csv_and_rejects_bad_values() {
        let csv = "instance_id,variant,source_frame,target_frame,worker_id,q1,q2,q3,q4,q5,q6\n\
                   a,SFN,e,c,w1,2,1,,,,0\n";
        let r = parse_annotations("x.csv", csv).unwrap();
        assert_eq!(r[0].answers, [Some(2), Some(1), None, None, None, Some(0)]);
        assert_eq!(r[0].score(Dimension::Framing), Some(0));
        let bad = csv.replace(",0\n", ",3\n");
        assert!(parse_annotations("x.csv", &bad)
            .unwrap_err()
            .to_string()
            .contains("q6"));
    }

    #[test]
    fn coherence_mean_and_framing_question() {
        let t = Frame::Crime;
        let recs = vec![
            rec("a", "SA", Frame::Economic, t, "w1", full(2, 2, 2, t)),
            rec("a", "SA", Frame::Economic, t, "w2", full(2, 2, 1, t)),
            rec("a", "SA", Frame::Economic, t, "w3", full(1, 2, 0, t)),
        ];
        let table = aggregate_scores(&recs).unwrap();
        let inter = &table.rows["SA"].inter;
        assert!((inter.coherence.value().unwrap() - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(fmt2(inter.coherence.value().unwrap()), "1.67");
        assert_eq!(inter.framing.value(), Some(1.0));
        assert_eq!(table.rows["SA"].intra.coherence.n, 0);
    }

    #[test]
    fn missing_target_question_is_rejected() {
        let mut a = full(2, 2, 2, Frame::Economic);
        a[5] = None;
        let r = rec("x9", "SA", Frame::Economic, Frame::Crime, "w1", a);
        let err = aggregate_scores(&[r]).unwrap_err().to_string();
        assert!(err.contains("x9") && err.contains("q6"), "{err}");
    }

    #[test]
    fn agreement_counts() {
        let t = Frame::Economic;
        let recs: Vec<_> = [2, 2, 1, 2, 0]
            .iter()
            .enumerate()
            .map(|(i, q1)| {
                let mut a = [None; 6];
                a[0] = Some(*q1);
                rec("a", "S0", t, t, &format!("w{i}"), a)
            })
            .collect();
        let ag = majority_agreement(&recs);
        assert_eq!((ag.items, ag.skipped), (1, 0));
        assert!((ag.mean - 0.6).abs() < 1e-12);
        let mut solo = recs[0].clone();
        solo.instance_id = "b".into();
        let ag = majority_agreement(&[recs.clone(), vec![solo]].concat());
        assert_eq!((ag.items, ag.skipped), (1, 1));
        let unanimous: Vec<_> = recs
            .iter()
            .map(|r| AnnotationRecord {
                answers: [Some(1), None, None, None, None, None],
                ..r.clone()
            })
            .collect();
        assert_eq!(majority_agreement(&unanimous).mean, 1.0);
    }

    #[test]
    fn direction_cells() {
        let recs = vec![
            rec(
                "a",
                "SFN",
                Frame::Crime,
                Frame::Economic,
                "w1",
                full(2, 2, 2, Frame::Economic),
            ),
            rec(
                "a",
                "SFN",
                Frame::Crime,
                Frame::Economic,
                "w2",
                full(1, 2, 2, Frame::Economic),
            ),
            rec(
                "b",
                "SFN",
                Frame::Crime,
                Frame::Crime,
                "w1",
                full(0, 0, 0, Frame::Crime),
            ),
        ];
        let m = direction_matrix(&recs, Dimension::Coherence).unwrap();
        assert_eq!(m.cell(Frame::Crime, Frame::Economic), Some(1.5));
        assert_eq!(m.cell(Frame::Crime, Frame::Crime), None);
        assert_eq!(m.cell(Frame::Economic, Frame::Legality), None);
        assert_eq!(m.row_avg(Frame::Crime), Some(1.5));
        assert_eq!(m.total_count(), 2);
        let md = render_direction_matrix(&m);
        assert!(md.contains("| c | 1.50 | – | – | – | 1.50 |"), "{md}");
    }

    #[test]
    fn constant_matrix_has_constant_averages() {
        let mut recs = Vec::new();
        for s in Frame::ALL {
            for t in Frame::ALL {
                recs.push(rec("a", "SA", s, t, "w", full(1, 1, 1, t)));
            }
        }
        let m = direction_matrix(&recs, Dimension::Framing).unwrap();
        for f in Frame::ALL {
            assert_eq!(m.row_avg(f), Some(1.0));
            assert_eq!(m.col_avg(f), Some(1.0));
        }
        assert_eq!(m.overall_avg(), Some(1.0));
        assert_eq!(m.total_count(), 12);
    }

    fn row(v: &str, c: f64, f: f64) -> PilotRow {
        PilotRow {
            variant: v.into(),
            coherence: c,
            framing: f,
            ranks: BTreeMap::new(),
        }
    }

    #[test]
    fn selection_single_and_ties() {
        let one = select_models(&[row("SF", 1.0, 0.5)]).unwrap();
        assert_eq!(one.coherence, vec!["SF"]);
        assert_eq!(one.framing, vec!["SF"]);
        assert_eq!(one.balance, vec!["SF"]);
        let tied = select_models(&[row("SA", 1.0, 0.5), row("SN", 0.5, 1.0)]).unwrap();
        assert_eq!(tied.balance, vec!["SA", "SN"]);
        assert!(matches!(select_models(&[]), Err(Error::EmptyTable)));
    }

    #[test]
    fn ranks_compete() {
        assert_eq!(
            competition_ranks(&[0.3, 0.9, 0.9, 0.9, 0.1]),
            vec![4, 1, 1, 1, 5]
        );
        assert_eq!(
            competition_ranks(&[0.9, 0.5, 0.5, 0.5, 0.1]),
            vec![1, 2, 2, 2, 5]
        );
    }

    #[test]
    fn pilot_rows_from_records() {
        let t = Frame::Economic;
        let mk = |v: &str, w: &str, c: u8, f: u8| {
            let mut a = [None; 6];
            a[0] = Some(c);
            a[2] = Some(f);
            rec("i", v, Frame::Crime, t, w, a)
        };
        let recs = vec![
            mk("SA", "A1", 0, 2),
            mk("SA", "A2", 1, 2),
            mk("SFN", "A1", 2, 1),
            mk("SFN", "A2", 2, 2),
        ];
        let rows = pilot_rows(&recs).unwrap();
        assert_eq!(rows[0].variant, "SA");
        assert_eq!(rows[0].coherence, 0.5);
        assert_eq!(rows[0].ranks["A1"], (2, 1));
        assert_eq!(rows[0].ranks["A2"], (2, 1));
        assert_eq!(rows[1].ranks["A2"], (1, 1));
        let md = render_pilot(&rows).unwrap();
        assert!(
            md.contains("| SA | 2 | 2 | 0.50 | 1 | 1 | 2.00 | 0.80 |"),
            "{md}"
        );
        assert!(md.contains("- B.Framing: SA (2.00)"), "{md}");
    }

    proptest! {
        #[test]
        fn selection_invariant_under_common_scaling(
            scores in proptest::collection::vec((0.0f64..2.0, 0.0f64..2.0), 1..8),
            scale in 0.1f64..10.0,
        ) {
            let names = ["S0", "SF", "SN", "SA", "SFN", "SFA", "SNA", "SFNA"];
            let rows: Vec<PilotRow> = scores.iter().enumerate().map(|(i, (c, f))| row(names[i], *c, *f)).collect();
            let scaled: Vec<PilotRow> = rows.iter().map(|r| row(&r.variant, r.coherence * scale, r.framing * scale)).collect();
            let a = select_models(&rows).unwrap();
            let b = select_models(&scaled).unwrap();
            prop_assert_eq!(a.coherence, b.coherence);
            prop_assert_eq!(a.framing, b.framing);
            prop_assert_eq!(a.balance, b.balance);
        }

        #[test]
        fn means_bounded_and_cells_sum(answers in proptest::collection::vec((0u8..3, 0u8..3, 0u8..3, 0usize..4, 0usize..4), 1..60)) {
            let recs: Vec<_> = answers.iter().enumerate().map(|(i, (c, t, f, s, g))| {
                let (s, g) = (Frame::ALL[*s], Frame::ALL[*g]);
                rec(&format!("i{i}"), "SNA", s, g, "w", full(*c, *t, *f, g))
            }).collect();
            let table = aggregate_scores(&recs).unwrap();
            for block in [&table.rows["SNA"].intra, &table.rows["SNA"].inter] {
                for d in Dimension::ALL {
                    if let Some(v) = block.get(d).value() {
                        prop_assert!((0.0..=2.0).contains(&v));
                    }
                }
            }
            let inter = recs.iter().filter(|r| !r.is_intra_frame()).count() as u64;
            for d in Dimension::ALL {
                prop_assert_eq!(direction_matrix(&recs, d).unwrap().total_count(), inter);
            }
        }
    }
}
