//! US calibration tables: income deciles, CPI goods basket, federal brackets,
//! sales tax, enforcement defaults and persona corpora.
//!
//! The bundled CSV/text files under `data/` are compiled in; any of them can
//! be replaced by a file on disk through [`CalibrationPaths`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::econ::{EconError, EnforcementPolicy, Good, IncomeTaxSchedule, SalesTaxRate};
use crate::money::Money;

pub const BUNDLED_DECILES: &str = include_str!("../data/deciles.csv");
pub const BUNDLED_GOODS: &str = include_str!("../data/goods.csv");
pub const BUNDLED_BRACKETS: &str = include_str!("../data/brackets.csv");
pub const BUNDLED_PERSONAS: [(&str, &str); 3] = [
    ("law_abiding", include_str!("../data/persona/law_abiding.txt")),
    ("law_breaking", include_str!("../data/persona/law_breaking.txt")),
    ("random", include_str!("../data/persona/random.txt")),
];

/// Average combined state and local sales tax rate.
pub const DEFAULT_SALES_RATE: f64 = 0.0644;
/// Civil fraud penalty on the underpaid amount.
pub const DEFAULT_PENALTY_RATE: f64 = 0.75;
/// Criminal fine for individuals.
pub const DEFAULT_FIXED_FINE: f64 = 100_000.0;
pub const DEFAULT_AUDIT_PROBABILITY: f64 = 0.1;
pub const DEFAULT_AUDIT_PERIOD: u32 = 365;
/// Unit price of a good per point of CPI relative importance, used when
/// goods.csv carries no `price` column.
pub const PRICE_PER_RELATIVE_IMPORTANCE: f64 = 100.0;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u64, message: String },
    #[error("{file}: {message}")]
    Validation { file: String, message: String },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Econ(#[from] EconError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationData {
    /// Annual household income per decile, ascending.
    pub income_deciles: Vec<Money>,
    pub goods_catalog: Vec<Good>,
    pub tax_schedule: IncomeTaxSchedule,
    pub sales_rate: SalesTaxRate,
    pub enforcement_defaults: EnforcementPolicy,
    /// Persona id → snippets, most recent first.
    pub persona_corpus: BTreeMap<String, Vec<String>>,
}

/// Optional replacements for the bundled files.
#[derive(Debug, Clone, Default)]
pub struct CalibrationPaths {
    pub deciles: Option<PathBuf>,
    pub goods: Option<PathBuf>,
    pub brackets: Option<PathBuf>,
    /// Directory of `<persona_id>.txt` files; replaces the bundled corpus.
    pub persona_dir: Option<PathBuf>,
}

impl CalibrationData {
    /// The bundled US defaults.
    pub fn bundled() -> Self {
        load_calibration(&CalibrationPaths::default()).expect("bundled calibration data is valid")
    }

    pub fn mean_annual_income(&self) -> Money {
        Money(self.income_deciles.iter().map(|m| m.0).sum::<f64>() / self.income_deciles.len() as f64)
    }

    pub fn persona(&self, id: &str) -> Option<&[String]> {
        self.persona_corpus.get(id).map(Vec::as_slice)
    }
}

fn read(path: &Path) -> Result<String, CalibrationError> {
    fs::read_to_string(path).map_err(|source| CalibrationError::Io { path: path.to_path_buf(), source })
}

fn source<'a>(
    path: &Option<PathBuf>,
    bundled: &'a str,
    name: &str,
) -> Result<(std::borrow::Cow<'a, str>, String), CalibrationError> {
    match path {
        Some(p) => Ok((read(p)?.into(), p.display().to_string())),
        None => Ok((bundled.into(), format!("<bundled>/{name}"))),
    }
}

pub fn load_calibration(paths: &CalibrationPaths) -> Result<CalibrationData, CalibrationError> {
    let (text, file) = source(&paths.deciles, BUNDLED_DECILES, "deciles.csv")?;
    let income_deciles = parse_deciles(&text, &file)?;
    let (text, file) = source(&paths.goods, BUNDLED_GOODS, "goods.csv")?;
    let goods_catalog = parse_goods(&text, &file)?;
    let (text, file) = source(&paths.brackets, BUNDLED_BRACKETS, "brackets.csv")?;
    let tax_schedule = parse_brackets(&text, &file)?;

    let mut persona_corpus = BTreeMap::new();
    match &paths.persona_dir {
        None => {
            for (id, text) in BUNDLED_PERSONAS {
                persona_corpus.insert(id.to_string(), parse_persona(text));
            }
        }
        Some(dir) => {
            let entries = fs::read_dir(dir).map_err(|source| CalibrationError::Io { path: dir.clone(), source })?;
            for entry in entries {
                let entry = entry.map_err(|source| CalibrationError::Io { path: dir.clone(), source })?;
                let path = entry.path();
                if path.extension().is_some_and(|e| e == "txt") {
                    let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    persona_corpus.insert(id, parse_persona(&read(&path)?));
                }
            }
        }
    }

    let enforcement_defaults = EnforcementPolicy {
        audit_probability: DEFAULT_AUDIT_PROBABILITY,
        penalty_rate: DEFAULT_PENALTY_RATE,
        fixed_fine: Money(DEFAULT_FIXED_FINE),
        audit_period: DEFAULT_AUDIT_PERIOD,
    };

    Ok(CalibrationData {
        income_deciles,
        goods_catalog,
        tax_schedule,
        sales_rate: SalesTaxRate::new(DEFAULT_SALES_RATE)?,
        enforcement_defaults,
        persona_corpus,
    })
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn parse_rows<T: for<'de> Deserialize<'de>>(text: &str, file: &str) -> Result<Vec<T>, CalibrationError> {
    let mut rows = Vec::new();
    let mut reader = csv_reader(text);
    for record in reader.deserialize::<T>() {
        match record {
            Ok(row) => rows.push(row),
            Err(e) => {
                let line = e.position().map_or(0, csv::Position::line);
                return Err(CalibrationError::Parse { file: file.to_string(), line, message: e.to_string() });
            }
        }
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct DecileRow {
    decile: u32,
    income: f64,
}

pub fn parse_deciles(text: &str, file: &str) -> Result<Vec<Money>, CalibrationError> {
    let rows: Vec<DecileRow> = parse_rows(text, file)?;
    let invalid = |message: String| CalibrationError::Validation { file: file.to_string(), message };
    if rows.len() != 10 {
        return Err(invalid(format!("expected 10 deciles, found {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.decile as usize != i + 1 {
            return Err(invalid(format!("decile {} out of order at row {}", row.decile, i + 1)));
        }
        if !(row.income > 0.0) {
            return Err(invalid(format!("decile {} income must be positive", row.decile)));
        }
    }
    if rows.windows(2).any(|w| w[1].income <= w[0].income) {
        return Err(invalid("decile incomes must be strictly ascending".into()));
    }
    Ok(rows.into_iter().map(|r| Money(r.income)).collect())
}

#[derive(Deserialize)]
struct GoodRow {
    id: usize,
    name: String,
    weight: f64,
    #[serde(default)]
    price: Option<f64>,
}

pub fn parse_goods(text: &str, file: &str) -> Result<Vec<Good>, CalibrationError> {
    let rows: Vec<GoodRow> = parse_rows(text, file)?;
    let invalid = |message: String| CalibrationError::Validation { file: file.to_string(), message };
    if rows.is_empty() {
        return Err(invalid("goods catalog is empty".into()));
    }
    let total: f64 = rows.iter().map(|r| r.weight).sum();
    if !(total > 0.0) || rows.iter().any(|r| !(r.weight >= 0.0)) {
        return Err(invalid("weights must be non-negative with a positive sum".into()));
    }
    rows.into_iter()
        .map(|r| {
            let price = r.price.unwrap_or(r.weight * PRICE_PER_RELATIVE_IMPORTANCE);
            if !(price > 0.0) {
                return Err(invalid(format!("good {} has non-positive price", r.id)));
            }
            Ok(Good { id: r.id, name: r.name, price: Money(price), weight: r.weight / total })
        })
        .collect()
}

#[derive(Deserialize)]
struct BracketRow {
    lower_bound: f64,
    rate: f64,
}

pub fn parse_brackets(text: &str, file: &str) -> Result<IncomeTaxSchedule, CalibrationError> {
    let rows: Vec<BracketRow> = parse_rows(text, file)?;
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.lower_bound, r.rate)).collect();
    IncomeTaxSchedule::progressive(&pairs).map_err(|e| CalibrationError::Validation {
        file: file.to_string(),
        message: e.to_string(),
    })
}

/// One snippet per non-empty line.
pub fn parse_persona(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()
}

/// Writes the bundled files to `dir` in the on-disk layout
/// (`deciles.csv`, `goods.csv`, `brackets.csv`, `persona/<id>.txt`).
pub fn write_bundled_defaults(dir: &Path) -> std::io::Result<CalibrationPaths> {
    fs::create_dir_all(dir.join("persona"))?;
    fs::write(dir.join("deciles.csv"), BUNDLED_DECILES)?;
    fs::write(dir.join("goods.csv"), BUNDLED_GOODS)?;
    fs::write(dir.join("brackets.csv"), BUNDLED_BRACKETS)?;
    for (id, text) in BUNDLED_PERSONAS {
        fs::write(dir.join("persona").join(format!("{id}.txt")), text)?;
    }
    Ok(CalibrationPaths {
        deciles: Some(dir.join("deciles.csv")),
        goods: Some(dir.join("goods.csv")),
        brackets: Some(dir.join("brackets.csv")),
        persona_dir: Some(dir.join("persona")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_deciles_match_census_table() {
        let c = CalibrationData::bundled();
        assert_eq!(c.income_deciles.len(), 10);
        assert_eq!(c.income_deciles[0], Money(18_980.0));
        assert_eq!(c.income_deciles[9], Money(316_100.0));
    }

    #[test]
    fn bundled_schedule_matches_federal_brackets() {
        let c = CalibrationData::bundled();
        assert_eq!(c.tax_schedule.brackets.len(), 7);
        let top = c.tax_schedule.brackets.last().unwrap();
        assert_eq!(top.rate, 0.37);
        // taxed at 37% from the 578,126th dollar on
        assert_eq!(top.lower_bound, Money(578_125.0));
        assert_eq!(c.sales_rate.rate(), 0.0644);
    }

    #[test]
    fn goods_weights_normalize() {
        let c = CalibrationData::bundled();
        let sum: f64 = c.goods_catalog.iter().map(|g| g.weight).sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert!(c.goods_catalog.iter().all(|g| g.price.0 > 0.0));
    }

    #[test]
    fn personas_loaded() {
        let c = CalibrationData::bundled();
        assert_eq!(c.persona("law_abiding").unwrap().len(), 20);
        assert_eq!(c.persona("law_breaking").unwrap().len(), 20);
        assert!(c.persona("random").unwrap().len() >= 20);
    }

    #[test]
    fn nine_deciles_rejected() {
        let text: String = BUNDLED_DECILES.lines().take(10).collect::<Vec<_>>().join("\n");
        let err = parse_deciles(&text, "deciles.csv").unwrap_err();
        assert!(matches!(err, CalibrationError::Validation { .. }), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "decile,income\n1,100\n2,abc\n";
        match parse_deciles(text, "d.csv").unwrap_err() {
            CalibrationError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn explicit_price_column_wins() {
        let goods = parse_goods("id,name,weight,price\n0,a,1,2.5\n1,b,3,4\n", "g.csv").unwrap();
        assert_eq!(goods[0].price, Money(2.5));
        assert_eq!(goods[1].weight, 0.75);
    }
}
