// SPDX-License-Identifier: Apache-2.0

//! Synthetic credit-scoring population with personal identifiers.
//!
//! Each row is one person: name, date of birth and address, four
//! bureau-style features (held by the bank, which also holds the default
//! label) and four demographic features (held by the second provider). The
//! positive class is the top 7% of a noisy linear risk score.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use vfl_learn::Table;

use crate::config::{CREDIT_FEATURES_A, CREDIT_FEATURES_B, CREDIT_LABEL, CREDIT_PI};

/// Share of positive (defaulting) rows.
pub const DEFAULT_RATE: f64 = 0.07;

const GIVEN: [&str; 48] = [
    "james",
    "mary",
    "robert",
    "patricia",
    "john",
    "jennifer",
    "michael",
    "linda",
    "david",
    "elizabeth",
    "william",
    "barbara",
    "richard",
    "susan",
    "joseph",
    "jessica",
    "thomas",
    "sarah",
    "charles",
    "karen",
    "christopher",
    "lisa",
    "daniel",
    "nancy",
    "matthew",
    "betty",
    "anthony",
    "margaret",
    "mark",
    "sandra",
    "donald",
    "ashley",
    "steven",
    "kimberly",
    "paul",
    "emily",
    "andrew",
    "donna",
    "joshua",
    "michelle",
    "kenneth",
    "carol",
    "kevin",
    "amanda",
    "brian",
    "melissa",
    "george",
    "deborah",
];

const SURNAMES: [&str; 48] = [
    "smith",
    "johnson",
    "williams",
    "brown",
    "jones",
    "garcia",
    "miller",
    "davis",
    "rodriguez",
    "martinez",
    "hernandez",
    "lopez",
    "gonzalez",
    "wilson",
    "anderson",
    "thomas",
    "taylor",
    "moore",
    "jackson",
    "martin",
    "lee",
    "perez",
    "thompson",
    "white",
    "harris",
    "sanchez",
    "clark",
    "ramirez",
    "lewis",
    "robinson",
    "walker",
    "young",
    "allen",
    "king",
    "wright",
    "scott",
    "torres",
    "nguyen",
    "hill",
    "flores",
    "green",
    "adams",
    "nelson",
    "baker",
    "hall",
    "rivera",
    "campbell",
    "mitchell",
];

const STREETS: [&str; 24] = [
    "main st",
    "oak ave",
    "pine rd",
    "maple dr",
    "cedar ln",
    "elm st",
    "park ave",
    "lake rd",
    "hill st",
    "river rd",
    "church st",
    "high st",
    "mill ln",
    "station rd",
    "north ave",
    "south st",
    "west end",
    "bay rd",
    "forest dr",
    "garden st",
    "spring ln",
    "valley rd",
    "meadow dr",
    "sunset blvd",
];

const CITIES: [&str; 16] = [
    "springfield",
    "riverton",
    "fairview",
    "georgetown",
    "madison",
    "franklin",
    "clinton",
    "arlington",
    "salem",
    "bristol",
    "oakland",
    "ashland",
    "dover",
    "milton",
    "newport",
    "kingston",
];

/// Column order of [`credit_table`].
pub fn credit_header() -> Vec<String> {
    CREDIT_PI
        .iter()
        .chain(&CREDIT_FEATURES_A)
        .chain(&CREDIT_FEATURES_B)
        .chain(std::iter::once(&CREDIT_LABEL))
        .map(|s| (*s).to_string())
        .collect()
}

/// `rows` people with exactly `round(0.07 rows)` defaults.
pub fn credit_table(rows: usize, seed: u64) -> Table {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, 1.0).expect("positive scale");
    let mut people = Vec::with_capacity(rows);
    let mut risk = Vec::with_capacity(rows);
    for _ in 0..rows {
        let age = rng.gen_range(21..=75);
        let birth_year = 2024 - age;
        let dob = format!("{birth_year}-{:02}-{:02}", rng.gen_range(1..=12), rng.gen_range(1..=28));
        let address = format!(
            "{} {}, {}",
            rng.gen_range(1..=999),
            STREETS[rng.gen_range(0..STREETS.len())],
            CITIES[rng.gen_range(0..CITIES.len())]
        );
        let given = GIVEN[rng.gen_range(0..GIVEN.len())];
        let surname = SURNAMES[rng.gen_range(0..SURNAMES.len())];

        let z_income: f64 = std.sample(&mut rng);
        let income = (52.0 + 18.0 * z_income + 0.3 * f64::from(age - 45)).max(8.0);
        let months_employed = (rng.gen_range(0.0..1.0_f64) * 12.0 * f64::from(age - 18)).round();
        let z_savings: f64 = std.sample(&mut rng);
        let savings = (20.0 + 12.0 * z_income + 10.0 * z_savings).max(0.0);
        let credit_lines = (5.0 + 2.5 * std.sample(&mut rng)).round().max(0.0);
        let utilization = (0.35 + 0.2 * std.sample(&mut rng) - 0.05 * z_income).clamp(0.0, 1.0);
        let late_payments = (1.2 * std.sample(&mut rng) + 2.0 * utilization).round().max(0.0);
        let debt_ratio = (0.3 + 0.12 * std.sample(&mut rng) - 0.04 * z_income).clamp(0.0, 1.5);

        let score = 3.0 * (utilization - 0.35) + 0.8 * (late_payments - 0.8) + 4.0 * (debt_ratio - 0.3)
            - 0.04 * (income - 52.0)
            - 0.02 * f64::from(age - 45)
            - 0.03 * (savings - 20.0)
            - 0.004 * (months_employed - 150.0)
            + 0.05 * (credit_lines - 5.0)
            + noise.sample(&mut rng);
        risk.push(score);
        people.push(vec![
            given.to_string(),
            surname.to_string(),
            dob,
            address,
            format!("{credit_lines}"),
            format!("{utilization:.3}"),
            format!("{late_payments}"),
            format!("{debt_ratio:.3}"),
            format!("{age}"),
            format!("{income:.2}"),
            format!("{months_employed}"),
            format!("{savings:.2}"),
        ]);
    }
    let positives = (DEFAULT_RATE * rows as f64).round() as usize;
    let mut order: Vec<usize> = (0..rows).collect();
    // Random tie-breaking before the stable sort keeps equal scores unbiased.
    order.shuffle(&mut rng);
    order.sort_by(|&i, &j| risk[j].total_cmp(&risk[i]));
    let mut label = vec!["0"; rows];
    for &i in &order[..positives] {
        label[i] = "1";
    }
    for (row, l) in people.iter_mut().zip(label) {
        row.push(l.to_string());
    }
    Table { header: credit_header(), rows: people }
}
