use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tost::{check_bound_alpha, tost_paired, TostResult};
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(alias = "a")]
    A,
    #[serde(alias = "b")]
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Simulatar,
    Hmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Noticeability,
    Identifiability,
    Comfort,
    Awareness,
    Multitaskability,
}

/// One 7-point Likert rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub participant: String,
    pub context: String,
    pub variant: Variant,
    pub method: Method,
    pub dimension: Dimension,
    pub rating: u8,
}

fn csv_error(path: &str, line: u64, message: impl Into<String>) -> StatsError {
    StatsError::Csv {
        path: path.to_owned(),
        line,
        message: message.into(),
    }
}

/// Parses ratings CSV with header
/// `participant,context,variant,method,dimension,rating`.
pub fn read_ratings_from(reader: impl Read, label: &str) -> Result<Vec<RatingRecord>, StatsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(label, 1, e.to_string()))?
        .clone();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(label, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let rec: RatingRecord = row
            .deserialize(Some(&headers))
            .map_err(|e| csv_error(label, line, e.to_string()))?;
        if !(1..=7).contains(&rec.rating) {
            return Err(csv_error(label, line, format!("rating {} outside 1..=7", rec.rating)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_ratings(path: &Path) -> Result<Vec<RatingRecord>, StatsError> {
    let label = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| csv_error(&label, 0, e.to_string()))?;
    read_ratings_from(file, &label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellColor {
    /// Both variants equivalent.
    Green,
    /// Exactly one variant equivalent.
    Yellow,
    /// Neither variant equivalent.
    Red,
}

impl CellColor {
    pub fn from_verdicts(a: bool, b: bool) -> Self {
        match (a, b) {
            (true, true) => CellColor::Green,
            (true, false) | (false, true) => CellColor::Yellow,
            (false, false) => CellColor::Red,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub context: String,
    pub dimension: Dimension,
    pub color: CellColor,
    pub variant_a: Option<TostResult>,
    pub variant_b: Option<TostResult>,
}

/// A (context, variant, dimension) test that could not be run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indeterminate {
    pub context: String,
    pub variant: Variant,
    pub dimension: Dimension,
    pub reason: String,
}

/// A participant who rated a condition with only one of the two methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnpairedRecord {
    pub participant: String,
    pub context: String,
    pub variant: Variant,
    pub dimension: Dimension,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceGrid {
    pub bound: f64,
    pub alpha: f64,
    pub cells: Vec<GridCell>,
    /// Variant tests that failed for lack of data or variance. Such a variant
    /// counts as not equivalent when coloring its cell.
    pub indeterminate: Vec<Indeterminate>,
    pub unpaired: Vec<UnpairedRecord>,
}

impl EquivalenceGrid {
    pub fn cell(&self, context: &str, dimension: Dimension) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.context == context && c.dimension == dimension)
    }

    pub fn warning_count(&self) -> usize {
        self.unpaired.len()
    }
}

type CellKey = (String, Variant, Dimension);

#[derive(Default)]
struct Accum {
    sum: f64,
    count: u32,
}

impl Accum {
    fn mean(&self) -> f64 {
        self.sum / f64::from(self.count)
    }
}

/// Pairs ratings across methods and classifies every (context, dimension)
/// cell. A participant's repeated ratings within one condition are averaged
/// before pairing; differences are `simulatar - hmd`.
pub fn build_grid(records: &[RatingRecord], bound: f64, alpha: f64) -> Result<EquivalenceGrid, StatsError> {
    check_bound_alpha(bound, alpha)?;
    // cell -> participant -> [simulatar, hmd]
    let mut by_cell: BTreeMap<CellKey, BTreeMap<&str, [Accum; 2]>> = BTreeMap::new();
    for r in records {
        let slot = by_cell
            .entry((r.context.clone(), r.variant, r.dimension))
            .or_default()
            .entry(r.participant.as_str())
            .or_default();
        let acc = &mut slot[r.method as usize];
        acc.sum += f64::from(r.rating);
        acc.count += 1;
    }

    let mut unpaired = Vec::new();
    let mut results: BTreeMap<(String, Dimension), [Option<TostResult>; 2]> = BTreeMap::new();
    let mut indeterminate = Vec::new();
    for ((context, variant, dimension), participants) in &by_cell {
        let mut diffs = Vec::with_capacity(participants.len());
        for (participant, [sim, hmd]) in participants {
            match (sim.count, hmd.count) {
                (0, _) | (_, 0) => unpaired.push(UnpairedRecord {
                    participant: (*participant).to_owned(),
                    context: context.clone(),
                    variant: *variant,
                    dimension: *dimension,
                    method: if sim.count > 0 { Method::Simulatar } else { Method::Hmd },
                }),
                _ => diffs.push(sim.mean() - hmd.mean()),
            }
        }
        let entry = results.entry((context.clone(), *dimension)).or_default();
        match tost_paired(&diffs, bound, alpha) {
            Ok(r) => entry[*variant as usize] = Some(r),
            Err(e) => indeterminate.push(Indeterminate {
                context: context.clone(),
                variant: *variant,
                dimension: *dimension,
                reason: e.to_string(),
            }),
        }
    }

    for ((context, dimension), _) in &results {
        for variant in [Variant::A, Variant::B] {
            if !by_cell.contains_key(&(context.clone(), variant, *dimension)) {
                indeterminate.push(Indeterminate {
                    context: context.clone(),
                    variant,
                    dimension: *dimension,
                    reason: "no ratings for this variant".into(),
                });
            }
        }
    }

    let cells = results
        .into_iter()
        .map(|((context, dimension), [a, b])| {
            let eq = |r: &Option<TostResult>| r.is_some_and(|r| r.equivalent);
            GridCell {
                color: CellColor::from_verdicts(eq(&a), eq(&b)),
                context,
                dimension,
                variant_a: a,
                variant_b: b,
            }
        })
        .collect();
    Ok(EquivalenceGrid {
        bound,
        alpha,
        cells,
        indeterminate,
        unpaired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(p: usize, ctx: &str, variant: Variant, method: Method, dim: Dimension, rating: u8) -> RatingRecord {
        RatingRecord {
            participant: format!("P{p:02}"),
            context: ctx.into(),
            variant,
            method,
            dimension: dim,
            rating,
        }
    }

    /// Twelve participants; headset rating 4, simulator rating `4 + offset[i]`.
    fn variant_records(ctx: &str, variant: Variant, offsets: &[i8]) -> Vec<RatingRecord> {
        offsets
            .iter()
            .enumerate()
            .flat_map(|(i, &o)| {
                [
                    rec(i, ctx, variant, Method::Hmd, Dimension::Comfort, 4),
                    rec(i, ctx, variant, Method::Simulatar, Dimension::Comfort, (4 + o) as u8),
                ]
            })
            .collect()
    }

    const NOISE: [i8; 12] = [0, 0, 1, -1, 0, 0, 1, -1, 0, 0, 1, -1];
    const SHIFTED: [i8; 12] = [2, 2, 3, 1, 2, 2, 3, 1, 2, 2, 3, 1];
    /// A single +1 among twelve: mean 1/12, sd ~0.29.
    const QUIET: [i8; 12] = [0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0];

    fn as_diffs(o: &[i8]) -> Vec<f64> {
        o.iter().map(|&x| f64::from(x)).collect()
    }

    #[test]
    fn constructed_inputs_force_verdicts() {
        assert!(tost_paired(&as_diffs(&NOISE), 1.0, 0.05).unwrap().equivalent);
        assert!(tost_paired(&as_diffs(&QUIET), 1.0, 0.05).unwrap().equivalent);
        assert!(!tost_paired(&as_diffs(&SHIFTED), 1.0, 0.05).unwrap().equivalent);
    }

    #[test]
    fn yellow_when_one_variant_shifted() {
        let mut recs = variant_records("bus", Variant::A, &NOISE);
        recs.extend(variant_records("bus", Variant::B, &SHIFTED));
        let g = build_grid(&recs, 1.0, 0.05).unwrap();
        let cell = g.cell("bus", Dimension::Comfort).unwrap();
        assert_eq!(cell.color, CellColor::Yellow);
        assert_eq!(cell.variant_a.unwrap(), tost_paired(&as_diffs(&NOISE), 1.0, 0.05).unwrap());
        assert_eq!(cell.variant_b.unwrap(), tost_paired(&as_diffs(&SHIFTED), 1.0, 0.05).unwrap());
    }

    #[test]
    fn red_when_both_shifted() {
        let mut recs = variant_records("mall", Variant::A, &SHIFTED);
        recs.extend(variant_records("mall", Variant::B, &SHIFTED));
        let g = build_grid(&recs, 1.0, 0.05).unwrap();
        assert_eq!(g.cell("mall", Dimension::Comfort).unwrap().color, CellColor::Red);
    }

    #[test]
    fn green_when_both_quiet() {
        let mut recs = variant_records("office", Variant::A, &QUIET);
        recs.extend(variant_records("office", Variant::B, &NOISE));
        let g = build_grid(&recs, 1.0, 0.05).unwrap();
        assert_eq!(g.cell("office", Dimension::Comfort).unwrap().color, CellColor::Green);
        assert!(g.indeterminate.is_empty() && g.unpaired.is_empty());
    }

    #[test]
    fn unpaired_records_are_listed_and_excluded() {
        let mut recs = variant_records("bus", Variant::A, &NOISE);
        recs.extend(variant_records("bus", Variant::B, &NOISE));
        recs.push(rec(99, "bus", Variant::A, Method::Hmd, Dimension::Comfort, 7));
        let g = build_grid(&recs, 1.0, 0.05).unwrap();
        assert_eq!(g.warning_count(), 1);
        assert_eq!(g.unpaired[0].participant, "P99");
        assert_eq!(g.unpaired[0].method, Method::Hmd);
        assert_eq!(g.cell("bus", Dimension::Comfort).unwrap().variant_a.unwrap().n, 12);
    }

    #[test]
    fn degenerate_variant_is_indeterminate() {
        let mut recs = variant_records("bus", Variant::A, &[0; 12]);
        recs.extend(variant_records("bus", Variant::B, &NOISE));
        let g = build_grid(&recs, 1.0, 0.05).unwrap();
        assert_eq!(g.indeterminate.len(), 1);
        assert_eq!(g.indeterminate[0].variant, Variant::A);
        let cell = g.cell("bus", Dimension::Comfort).unwrap();
        assert!(cell.variant_a.is_none());
        assert_eq!(cell.color, CellColor::Yellow);
    }

    #[test]
    fn repeats_are_averaged() {
        let recs = vec![
            rec(1, "c", Variant::A, Method::Hmd, Dimension::Awareness, 4),
            rec(1, "c", Variant::A, Method::Simulatar, Dimension::Awareness, 4),
            rec(1, "c", Variant::A, Method::Simulatar, Dimension::Awareness, 6),
            rec(2, "c", Variant::A, Method::Hmd, Dimension::Awareness, 3),
            rec(2, "c", Variant::A, Method::Simulatar, Dimension::Awareness, 3),
        ];
        let g = build_grid(&recs, 1.0, 0.05).unwrap();
        let r = g.cell("c", Dimension::Awareness).unwrap().variant_a.unwrap();
        assert_eq!(r.n, 2);
        assert!((r.mean_diff - 0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_parsing() {
        let text = "participant,context,variant,method,dimension,rating\n\
                    P1,bus,A,simulatar,noticeability,5\n\
                    P1,bus,a,hmd,noticeability,4\n";
        let recs = read_ratings_from(text.as_bytes(), "inline").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].variant, Variant::A);
        assert_eq!(recs[1].method, Method::Hmd);

        let bad = "participant,context,variant,method,dimension,rating\nP1,bus,A,simulatar,noticeability,9\n";
        assert!(matches!(read_ratings_from(bad.as_bytes(), "x"), Err(StatsError::Csv { line: 2, .. })));
        let bad = "participant,context,variant,method,dimension,rating\nP1,bus,C,simulatar,noticeability,3\n";
        assert!(matches!(read_ratings_from(bad.as_bytes(), "x"), Err(StatsError::Csv { line: 2, .. })));
    }
}
