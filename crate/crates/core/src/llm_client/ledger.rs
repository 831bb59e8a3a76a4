use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};

/// Decimal places kept for USD amounts.
const USD_SCALE: u32 = 6;

/// `prompt/1000 * price_in + completion/1000 * price_out`, rounded half away
/// from zero to 1e-6 USD.
pub fn compute_cost(input_tokens: u64, output_tokens: u64, per_1k_input: Decimal, per_1k_output: Decimal) -> Decimal {
    let thousand = Decimal::from(1000);
    let raw =
        Decimal::from(input_tokens) * per_1k_input / thousand + Decimal::from(output_tokens) * per_1k_output / thousand;
    raw.round_dp_with_strategy(USD_SCALE, RoundingStrategy::MidpointAwayFromZero)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost_usd: Decimal,
    pub latency_s: f64,
    /// Token counts were estimated locally because the response had no usage.
    #[serde(default)]
    pub estimated: bool,
}

/// Append-only record of chat calls.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageLedger {
    records: Vec<UsageRecord>,
    total_cost_usd: Decimal,
    total_input_tokens: u64,
    total_output_tokens: u64,
}

impl UsageLedger {
    pub fn push(&mut self, record: UsageRecord) {
        self.total_cost_usd += record.cost_usd;
        self.total_input_tokens += record.input_tokens;
        self.total_output_tokens += record.output_tokens;
        self.records.push(record);
    }

    pub fn records(&self) -> &[UsageRecord] {
        &self.records
    }

    pub fn total_cost_usd(&self) -> Decimal {
        self.total_cost_usd
    }

    pub fn total_input_tokens(&self) -> u64 {
        self.total_input_tokens
    }

    pub fn total_output_tokens(&self) -> u64 {
        self.total_output_tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    fn d(s: &str) -> Decimal {
        Decimal::from_str(s).unwrap()
    }

    #[test]
    fn price_arithmetic() {
        assert_eq!(compute_cost(1000, 500, d("0.001"), d("0.002")), d("0.002"));
        assert_eq!(compute_cost(0, 0, d("0.5"), d("1.5")), Decimal::ZERO);
        // 1234 * 0.0007 / 1000 = 0.0008638 -> 0.000864
        assert_eq!(compute_cost(1234, 0, d("0.0007"), d("0")), d("0.000864"));
    }

    #[test]
    fn totals_are_exact_sums() {
        let mut ledger = UsageLedger::default();
        for i in 0..1000u64 {
            ledger.push(UsageRecord {
                input_tokens: i,
                output_tokens: 1,
                cost_usd: d("0.000001") * Decimal::from(i % 7),
                latency_s: 0.0,
                estimated: false,
            });
        }
        let expected: Decimal = ledger.records().iter().map(|r| r.cost_usd).sum();
        assert_eq!(ledger.total_cost_usd(), expected);
        assert_eq!(ledger.total_input_tokens(), (0..1000).sum::<u64>());
    }
}
