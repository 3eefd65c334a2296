//! Judgment records, comparison pools and the judgment file format.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SCORE: f64 = 0.0;
pub const MAX_SCORE: f64 = 100.0;

pub const HEADER: [&str; 6] = [
    "comparison_id",
    "language_pair",
    "system",
    "score",
    "segment_id",
    "annotator_id",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum System {
    A,
    B,
}

impl System {
    pub fn as_str(self) -> &'static str {
        match self {
            System::A => "A",
            System::B => "B",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for System {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(System::A),
            "B" | "b" => Ok(System::B),
            other => Err(format!("system must be A or B, got {other:?}")),
        }
    }
}

/// One human score for one system output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub comparison_id: String,
    pub system: System,
    pub score: f64,
    pub segment_id: Option<String>,
    pub annotator_id: Option<String>,
}

/// The judgments collected for one system, in collection order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub scores: Vec<f64>,
    pub segments: Vec<Option<String>>,
    pub annotators: Vec<Option<String>>,
}

impl Pool {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let n = scores.len();
        Pool {
            scores,
            segments: vec![None; n],
            annotators: vec![None; n],
        }
    }

    pub fn push(&mut self, score: f64, segment: Option<String>, annotator: Option<String>) {
        self.scores.push(score);
        self.segments.push(segment);
        self.annotators.push(annotator);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `(segment, score)` pairs, or `MissingSegments` if any judgment lacks a segment.
    pub fn segmented(&self) -> Result<Vec<(&str, f64)>> {
        self.segments
            .iter()
            .zip(&self.scores)
            .map(|(seg, &s)| seg.as_deref().map(|id| (id, s)).ok_or(Error::MissingSegments))
            .collect()
    }
}

/// A pairwise comparison: two judgment pools plus metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonData {
    pub comparison_id: String,
    pub language_pair: String,
    pub a: Pool,
    pub b: Pool,
}

impl ComparisonData {
    pub fn from_scores(
        comparison_id: impl Into<String>,
        language_pair: impl Into<String>,
        a: Vec<f64>,
        b: Vec<f64>,
    ) -> Self {
        ComparisonData {
            comparison_id: comparison_id.into(),
            language_pair: language_pair.into(),
            a: Pool::from_scores(a),
            b: Pool::from_scores(b),
        }
    }

    pub fn pool(&self, system: System) -> &Pool {
        match system {
            System::A => &self.a,
            System::B => &self.b,
        }
    }

    /// Checks the preconditions shared by every statistical operation.
    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() {
            return Err(Error::EmptyPool("A"));
        }
        if self.b.is_empty() {
            return Err(Error::EmptyPool("B"));
        }
        if !(mean(&self.a.scores) - mean(&self.b.scores)).is_finite() {
            return Err(Error::InvalidArgument(format!(
                "comparison {}: mean difference is not finite",
                self.comparison_id
            )));
        }
        Ok(())
    }

    /// Observed mean difference `mean(a) - mean(b)`.
    pub fn diff(&self) -> Result<f64> {
        Ok(summarize(self)?.diff)
    }

    pub fn judgments(&self) -> impl Iterator<Item = Judgment> + '_ {
        [System::A, System::B].into_iter().flat_map(move |sys| {
            let pool = self.pool(sys);
            (0..pool.len()).map(move |i| Judgment {
                comparison_id: self.comparison_id.clone(),
                system: sys,
                score: pool.scores[i],
                segment_id: pool.segments[i].clone(),
                annotator_id: pool.annotators[i].clone(),
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub diff: f64,
    pub var_a: f64,
    pub var_b: f64,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n - 1) sample variance; zero for a single observation.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    ss / (xs.len() - 1) as f64
}

pub fn summarize(c: &ComparisonData) -> Result<SummaryStats> {
    c.validate()?;
    let mean_a = mean(&c.a.scores);
    let mean_b = mean(&c.b.scores);
    Ok(SummaryStats {
        n_a: c.a.len(),
        n_b: c.b.len(),
        mean_a,
        mean_b,
        diff: mean_a - mean_b,
        var_a: sample_variance(&c.a.scores),
        var_b: sample_variance(&c.b.scores),
    })
}

fn non_empty(field: Option<&str>) -> Option<String> {
    field.map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned)
}

/// Reads a judgment table and groups it by comparison, in order of first
/// appearance. Row numbers in errors are physical line numbers (the header
/// is row 1).
pub fn load_judgments<R: Read>(source: R) -> Result<Vec<ComparisonData>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::EmptyInput),
        Some(h) => h?,
    };
    let width = header.len();
    if (width != 4 && width != 6) || header.iter().zip(HEADER).any(|(got, want)| got != want) {
        return Err(Error::Row {
            row: 1,
            message: format!("header must be {}", HEADER.join(",")),
        });
    }

    let mut order: Vec<ComparisonData> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();

    for (i, record) in records.enumerate() {
        let row = i + 2;
        let record = record?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != width {
            return Err(Error::Row {
                row,
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        let row_err = |message: String| Error::Row { row, message };

        let comparison_id = record[0].to_owned();
        if comparison_id.is_empty() {
            return Err(row_err("empty comparison_id".into()));
        }
        let language_pair = record[1].to_owned();
        let system: System = record[2].parse().map_err(row_err)?;
        let score: f64 = record[3]
            .parse()
            .map_err(|_| row_err(format!("score {:?} is not numeric", &record[3])))?;
        if !score.is_finite() || !(MIN_SCORE..=MAX_SCORE).contains(&score) {
            return Err(row_err(format!("score {score} outside [0, 100]")));
        }
        let segment = non_empty(record.get(4));
        let annotator = non_empty(record.get(5));

        let slot = *index.entry(comparison_id.clone()).or_insert_with(|| {
            order.push(ComparisonData {
                comparison_id: comparison_id.clone(),
                language_pair: language_pair.clone(),
                a: Pool::default(),
                b: Pool::default(),
            });
            order.len() - 1
        });
        let comparison = &mut order[slot];
        if comparison.language_pair != language_pair {
            return Err(row_err(format!(
                "language pair {language_pair:?} conflicts with {:?} for comparison {comparison_id}",
                comparison.language_pair
            )));
        }
        match system {
            System::A => comparison.a.push(score, segment, annotator),
            System::B => comparison.b.push(score, segment, annotator),
        }
    }

    if order.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(order)
}

/// Formats a score with six significant digits, trailing zeros trimmed.
pub fn format_score(score: f64) -> String {
    if score == 0.0 {
        return "0".to_owned();
    }
    let magnitude = score.abs().log10().floor() as i32 + 1;
    let decimals = (6 - magnitude).max(0) as usize;
    let mut text = format!("{score:.decimals$}");
    if text.contains('.') {
        let trimmed = text.trim_end_matches('0').trim_end_matches('.').len();
        text.truncate(trimmed);
    }
    text
}

pub fn write_judgments<W: Write>(sink: W, comparisons: &[ComparisonData]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(HEADER)?;
    for c in comparisons {
        for j in c.judgments() {
            writer.write_record([
                j.comparison_id.as_str(),
                c.language_pair.as_str(),
                j.system.as_str(),
                format_score(j.score).as_str(),
                j.segment_id.as_deref().unwrap_or(""),
                j.annotator_id.as_deref().unwrap_or(""),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn load(text: &str) -> Result<Vec<ComparisonData>> {
        load_judgments(text.as_bytes())
    }

    #[test]
    fn groups_one_comparison() {
        let text = "comparison_id,language_pair,system,score,segment_id,annotator_id\n\
                    c1,ENU-FRA,A,80,s1,\n\
                    c1,ENU-FRA,B,70,s1,\n\
                    c1,ENU-FRA,A,90,s2,\n\
                    c1,ENU-FRA,B,70,s2,\n";
        let data = load(text).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data[0].a.scores, vec![80.0, 90.0]);
        assert_eq!(data[0].b.scores, vec![70.0, 70.0]);
        assert_eq!(data[0].a.segments[1].as_deref(), Some("s2"));
        assert_eq!(data[0].a.annotators[0], None);
    }

    #[test]
    fn four_column_header_is_accepted() {
        let data = load("comparison_id,language_pair,system,score\nx,L,A,1\nx,L,B,2\n").unwrap();
        assert_eq!(data[0].a.len(), 1);
    }

    #[test]
    fn out_of_range_score_names_row() {
        let text = "comparison_id,language_pair,system,score,segment_id,annotator_id\n\
                    c1,L,A,80,,\n\
                    c1,L,B,101,,\n";
        let err = load(text).unwrap_err();
        assert!(matches!(err, Error::Row { row: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let head = "comparison_id,language_pair,system,score,segment_id,annotator_id\n";
        let err = load(&format!("{head}c1,L,A,abc,,\n")).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }));
        let err = load(&format!("{head}c1,L,A,50\n")).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }));
        let err = load(&format!("{head}c1,L,C,50,,\n")).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }));
        let err = load(&format!("{head}c1,L,A,NaN,,\n")).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }));
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(load(""), Err(Error::EmptyInput)));
        assert!(matches!(
            load("comparison_id,language_pair,system,score,segment_id,annotator_id\n"),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(load("a,b,c\n1,2,3\n"), Err(Error::Row { row: 1, .. })));
    }

    #[test]
    fn duplicate_rows_are_kept() {
        let data = load("comparison_id,language_pair,system,score\nx,L,A,5\nx,L,A,5\nx,L,B,5\n").unwrap();
        assert_eq!(data[0].a.scores, vec![5.0, 5.0]);
    }

    #[test]
    fn summary_two_point_arithmetic() {
        let c = ComparisonData::from_scores("c", "L", vec![80.0, 90.0], vec![70.0, 70.0]);
        let s = summarize(&c).unwrap();
        assert_eq!(s.diff, 15.0);
        assert_eq!(s.var_a, 50.0);
        assert_eq!(s.var_b, 0.0);
        assert_eq!((s.n_a, s.n_b), (2, 2));
    }

    #[test]
    fn summary_of_equal_pools_has_zero_diff() {
        let pool = vec![12.5, 99.0, 40.25, 63.0];
        let c = ComparisonData::from_scores("c", "L", pool.clone(), pool);
        assert_eq!(summarize(&c).unwrap().diff, 0.0);
    }

    #[test]
    fn summary_requires_both_pools() {
        let c = ComparisonData::from_scores("c", "L", vec![1.0], vec![]);
        assert!(matches!(summarize(&c), Err(Error::EmptyPool("B"))));
    }

    #[test]
    fn summary_matches_naive_recomputation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..=100.0)).collect();
        let b: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..=100.0)).collect();
        let s = summarize(&ComparisonData::from_scores("c", "L", a.clone(), b.clone())).unwrap();

        // Textbook one-pass formula: (sum x^2 - (sum x)^2 / n) / (n - 1).
        let naive = |xs: &[f64]| {
            let n = xs.len() as f64;
            let (s1, s2) = xs.iter().fold((0.0, 0.0), |(s1, s2), x| (s1 + x, s2 + x * x));
            (s1 / n, (s2 - s1 * s1 / n) / (n - 1.0))
        };
        let (ma, va) = naive(&a);
        let (mb, vb) = naive(&b);
        assert_abs_diff_eq!(s.mean_a, ma, epsilon = 1e-9);
        assert_abs_diff_eq!(s.mean_b, mb, epsilon = 1e-9);
        assert_abs_diff_eq!(s.var_a, va, epsilon = 1e-7);
        assert_abs_diff_eq!(s.var_b, vb, epsilon = 1e-7);
        assert_eq!(s.diff, s.mean_a - s.mean_b);
    }

    #[test]
    fn score_formatting_uses_six_significant_digits() {
        assert_eq!(format_score(0.0), "0");
        assert_eq!(format_score(100.0), "100");
        assert_eq!(format_score(73.8), "73.8");
        assert_eq!(format_score(12.3456789), "12.3457");
        assert_eq!(format_score(0.125), "0.125");
        assert_eq!(format_score(99.99999), "100");
    }
}
