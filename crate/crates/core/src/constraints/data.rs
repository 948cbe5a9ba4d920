use std::fmt;
use std::str::FromStr;

use crate::error::{input, Error, Result};

/// Divergence scenario for a microsatellite panel.
///
/// `A`: two demes split at `tau`. `B`: demes 2 and 3 split at `tau1`, and
/// their ancestor split from deme 1 at `tau2 >= tau1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    A,
    B,
}

impl Scenario {
    pub fn n_demes(self) -> u8 {
        match self {
            Scenario::A => 2,
            Scenario::B => 3,
        }
    }

    /// Number of parameters: `theta` plus one divergence time per split.
    pub fn n_params(self) -> usize {
        match self {
            Scenario::A => 2,
            Scenario::B => 3,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::A => "A",
            Scenario::B => "B",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Scenario::A),
            "B" | "b" => Ok(Scenario::B),
            other => input(format!("unknown scenario {other:?}")),
        }
    }
}

/// Allele states (repeat counts relative to the root) of every gene at one locus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Locus {
    pub alleles: Vec<i32>,
    /// Deme label of each gene, `1..=n_demes`.
    pub demes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Microsat {
    pub scenario: Scenario,
    pub loci: Vec<Locus>,
}

impl Microsat {
    pub fn new(scenario: Scenario, loci: Vec<Locus>) -> Result<Self> {
        if loci.is_empty() {
            return input("microsatellite panel has no loci");
        }
        let max = scenario.n_demes();
        for (k, l) in loci.iter().enumerate() {
            if l.alleles.len() != l.demes.len() || l.alleles.is_empty() {
                return input(format!("locus {k}: {} alleles, {} deme labels", l.alleles.len(), l.demes.len()));
            }
            if let Some(d) = l.demes.iter().find(|d| **d == 0 || **d > max) {
                return input(format!("locus {k}: deme {d} invalid for scenario {scenario}"));
            }
        }
        Ok(Self { scenario, loci })
    }

    /// Parse the panel text format: a header `K n_genes scenario`, then one
    /// line per locus of whitespace-separated `allele:deme` pairs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| Error::Parse { line: 1, msg: "empty panel".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let perr = |line: usize, msg: String| Error::Parse { line: line + 1, msg };
        if fields.len() != 3 {
            return Err(perr(hl, format!("header needs `K n_genes scenario`, got {header:?}")));
        }
        let k: usize = fields[0].parse().map_err(|_| perr(hl, format!("bad locus count {:?}", fields[0])))?;
        let n_genes: usize = fields[1].parse().map_err(|_| perr(hl, format!("bad gene count {:?}", fields[1])))?;
        let scenario: Scenario = fields[2].parse().map_err(|e: Error| perr(hl, e.to_string()))?;
        let mut loci = Vec::with_capacity(k);
        for (ln, line) in lines {
            let mut alleles = Vec::with_capacity(n_genes);
            let mut demes = Vec::with_capacity(n_genes);
            for tok in line.split_whitespace() {
                let (a, d) = tok.split_once(':').ok_or_else(|| perr(ln, format!("expected allele:deme, got {tok:?}")))?;
                alleles.push(a.parse().map_err(|_| perr(ln, format!("bad allele {a:?}")))?);
                demes.push(d.parse().map_err(|_| perr(ln, format!("bad deme {d:?}")))?);
            }
            if alleles.len() != n_genes {
                return Err(perr(ln, format!("expected {n_genes} genes, got {}", alleles.len())));
            }
            loci.push(Locus { alleles, demes });
        }
        if loci.len() != k {
            return Err(Error::Parse { line: 1, msg: format!("header declares {k} loci, found {}", loci.len()) });
        }
        Self::new(scenario, loci)
    }

    /// Inverse of [`Microsat::parse`]. Assumes every locus has the same gene count.
    pub fn to_text(&self) -> String {
        let n_genes = self.loci[0].alleles.len();
        let mut s = format!("{} {} {}\n", self.loci.len(), n_genes, self.scenario);
        for l in &self.loci {
            let toks: Vec<String> = l.alleles.iter().zip(&l.demes).map(|(a, d)| format!("{a}:{d}")).collect();
            s.push_str(&toks.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Observed data handed to constraint providers and summaries.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    /// Independent replicates.
    Iid(Vec<f64>),
    /// Time-ordered series.
    Series(Vec<f64>),
    Microsat(Microsat),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Iid(v) | Dataset::Series(v) => v.len(),
            Dataset::Microsat(m) => m.loci.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_iid(&self) -> Result<&[f64]> {
        match self {
            Dataset::Iid(v) if !v.is_empty() => Ok(v),
            Dataset::Iid(_) => input("empty sample"),
            _ => input("expected an iid sample"),
        }
    }

    pub fn as_series(&self) -> Result<&[f64]> {
        match self {
            Dataset::Series(v) if !v.is_empty() => Ok(v),
            Dataset::Series(_) => input("empty series"),
            _ => input("expected a time series"),
        }
    }

    pub fn as_microsat(&self) -> Result<&Microsat> {
        match self {
            Dataset::Microsat(m) => Ok(m),
            _ => input("expected a microsatellite panel"),
        }
    }

    /// Text form: one value per line for real data, the panel format otherwise.
    pub fn to_text(&self) -> String {
        match self {
            Dataset::Iid(v) | Dataset::Series(v) => v.iter().map(|x| format!("{x}\n")).collect(),
            Dataset::Microsat(m) => m.to_text(),
        }
    }

    /// Parse one-value-per-line text.
    pub fn parse_values(text: &str) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t.parse().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number {t:?}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: i + 1, msg: "non-finite value".into() });
            }
            out.push(v);
        }
        if out.is_empty() {
            return input("no values");
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_round_trip() {
        let text = "2 4 A\n0:1 1:1 -2:2 0:2\n3:1 3:1 3:2 4:2\n";
        let m = Microsat::parse(text).unwrap();
        assert_eq!(m.loci[0].alleles, vec![0, 1, -2, 0]);
        assert_eq!(m.loci[1].demes, vec![1, 1, 2, 2]);
        assert_eq!(m.to_text(), text);
    }

    #[test]
    fn panel_errors() {
        assert!(Microsat::parse("").is_err());
        assert!(Microsat::parse("1 2 A\n0:1\n").is_err());
        assert!(Microsat::parse("1 2 A\n0:1 0:3\n").is_err());
        assert!(Microsat::parse("2 2 A\n0:1 0:2\n").is_err());
        assert!(Microsat::parse("1 2 C\n0:1 0:2\n").is_err());
        assert!(Microsat::parse("1 2 B\n0:1 x:2\n").is_err());
        assert!(Microsat::parse("1 2 B\n0:1 1:3\n").is_ok());
    }

    #[test]
    fn values_round_trip() {
        let d = Dataset::Iid(vec![1.5, -0.25, 3.0]);
        assert_eq!(Dataset::parse_values(&d.to_text()).unwrap(), vec![1.5, -0.25, 3.0]);
        assert!(Dataset::parse_values("1\nnan\n").is_err());
        assert!(Dataset::parse_values("\n").is_err());
    }
}
