use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::schema::{Dataset, Style};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StyleStats {
    pub diagrams: usize,
    pub entities: usize,
    pub reactions: usize,
}

impl StyleStats {
    /// Reactions per diagram in tenths, rounded half away from zero.
    pub fn average_tenths(&self) -> usize {
        if self.diagrams == 0 {
            return 0;
        }
        (20 * self.reactions + self.diagrams) / (2 * self.diagrams)
    }

    /// Reactions per diagram rounded to one decimal.
    pub fn average(&self) -> f64 {
        self.average_tenths() as f64 / 10.0
    }

    fn add(&mut self, o: &StyleStats) {
        self.diagrams += o.diagrams;
        self.entities += o.entities;
        self.reactions += o.reactions;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    /// All four styles are present, zero-filled when absent from the data.
    pub per_style: BTreeMap<Style, StyleStats>,
    pub overall: StyleStats,
    /// Number of diagrams per reaction count.
    pub histogram: BTreeMap<usize, usize>,
}

pub fn stats(dataset: &Dataset) -> DatasetStats {
    let mut per_style: BTreeMap<Style, StyleStats> = Style::ALL
        .iter()
        .map(|s| (*s, StyleStats::default()))
        .collect();
    let mut histogram = BTreeMap::new();
    for r in &dataset.records {
        let s = per_style.get_mut(&r.style).expect("all styles present");
        s.add(&StyleStats {
            diagrams: 1,
            entities: r.entities.len(),
            reactions: r.reactions.len(),
        });
        *histogram.entry(r.reactions.len()).or_insert(0) += 1;
    }
    let mut overall = StyleStats::default();
    for s in per_style.values() {
        overall.add(s);
    }
    DatasetStats {
        per_style,
        overall,
        histogram,
    }
}

fn fmt_avg(s: &StyleStats) -> String {
    let t = s.average_tenths();
    format!("{}.{}", t / 10, t % 10)
}

type Cell = fn(&StyleStats) -> String;

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols: Vec<(&str, &StyleStats)> = Style::ALL
            .iter()
            .map(|s| (s.as_str(), &self.per_style[s]))
            .chain(std::iter::once(("overall", &self.overall)))
            .collect();
        write!(f, "{:<34}", "")?;
        for (name, _) in &cols {
            write!(f, "{name:>14}")?;
        }
        writeln!(f)?;
        let rows: [(&str, Cell); 4] = [
            ("Num. of diagrams", |s| s.diagrams.to_string()),
            ("Num. of entities", |s| s.entities.to_string()),
            ("Num. of reactions", |s| s.reactions.to_string()),
            ("Avg. num. of reactions per diagram", fmt_avg),
        ];
        for (label, cell) in rows {
            write!(f, "{label:<34}")?;
            for (_, s) in &cols {
                write!(f, "{:>14}", cell(s))?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(f, "reactions per diagram  diagrams")?;
        for (n, count) in &self.histogram {
            writeln!(f, "{n:>21}  {count}")?;
        }
        Ok(())
    }
}
