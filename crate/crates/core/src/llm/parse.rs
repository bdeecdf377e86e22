use std::sync::LazyLock;

use regex::Regex;

use super::LlmError;
use crate::money::Money;

static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(-\s*)?\$?\s*(\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?|\.\d+)").expect("valid regex")
});

/// Extracts the first number in `raw`, ignoring `$` and thousands
/// separators. Negative numbers and text without numbers are errors.
pub fn parse_amount(raw: &str) -> Result<Money, LlmError> {
    let caps = NUMBER.captures(raw).ok_or_else(|| LlmError::Parse(raw.to_string()))?;
    if caps.get(1).is_some() {
        return Err(LlmError::Parse(raw.to_string()));
    }
    let digits = caps[2].replace(',', "");
    let value: f64 = digits.parse().map_err(|_| LlmError::Parse(raw.to_string()))?;
    Ok(Money(value).round_cents())
}
