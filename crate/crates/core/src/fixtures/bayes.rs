use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{synthesized, FixtureSpec};
use crate::number::{ratio, Rational};
use crate::workbook::{CellContent, NumberFormat, Sheet, ValidationKind, ValidationRule, Workbook};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BayesError {
    #[error("{0} must lie in [0, 1]")]
    OutOfRange(&'static str),
    #[error("the {0} post-test probability is undefined (zero denominator)")]
    Undefined(&'static str),
}

/// Post-test probabilities after a positive and a negative result.
pub fn bayes_posttest(prev: &Rational, sens: &Rational, spec: &Rational) -> Result<(Rational, Rational), BayesError> {
    let unit = |x: &Rational| *x >= Rational::zero() && *x <= Rational::one();
    for (name, x) in [("prevalence", prev), ("sensitivity", sens), ("specificity", spec)] {
        if !unit(x) {
            return Err(BayesError::OutOfRange(name));
        }
    }
    let one = Rational::one();
    let tp = sens * prev;
    let fp = (&one - spec) * (&one - prev);
    let fn_ = (&one - sens) * prev;
    let tn = spec * (&one - prev);
    let pos_den = &tp + &fp;
    let neg_den = &fn_ + &tn;
    if pos_den.is_zero() {
        return Err(BayesError::Undefined("positive"));
    }
    if neg_den.is_zero() {
        return Err(BayesError::Undefined("negative"));
    }
    Ok((tp / pos_den, fn_ / neg_den))
}

/// Addresses of the interesting cells in the Bayes sheet.
#[derive(Debug, Clone, Copy)]
pub struct BayesLayout {
    pub sheet: &'static str,
    pub prevalence: &'static str,
    pub sensitivity: &'static str,
    pub specificity: &'static str,
    /// Post-test probability after a positive result, from the 2x2 table.
    pub p_pos: &'static str,
    /// Post-test probability after a negative result, from the 2x2 table.
    pub p_neg: &'static str,
    /// The same two probabilities computed through likelihood ratios.
    pub p_pos_odds: &'static str,
    pub p_neg_odds: &'static str,
}

pub const BAYES_LAYOUT: BayesLayout = BayesLayout {
    sheet: "Bayes",
    prevalence: "B3",
    sensitivity: "B4",
    specificity: "B5",
    p_pos: "B18",
    p_neg: "B19",
    p_pos_odds: "B27",
    p_neg_odds: "B29",
};

const FORMULAS: [(u32, &str, &str); 22] = [
    (7, "Population", "=10000"),
    (8, "True positives", "=B7*B3*B4"),
    (9, "False positives", "=B7*(1-B3)*(1-B5)"),
    (10, "False negatives", "=B7*B3*(1-B4)"),
    (11, "True negatives", "=B7*(1-B3)*B5"),
    (12, "Test positive", "=B8+B9"),
    (13, "Test negative", "=B10+B11"),
    (14, "With disease", "=B8+B10"),
    (15, "Without disease", "=B9+B11"),
    (16, "Total", "=B14+B15"),
    (18, "Post-test probability (positive test)", "=B8/B12"),
    (19, "Post-test probability (negative test)", "=B10/B13"),
    (20, "Positive predictive value (%)", "=B18*100"),
    (21, "Negative predictive value (%)", "=B11/B13*100"),
    (22, "Likelihood ratio (positive)", "=B4/(1-B5)"),
    (23, "Likelihood ratio (negative)", "=(1-B4)/B5"),
    (24, "Pre-test odds", "=B3/(1-B3)"),
    (25, "Post-test odds (positive)", "=B24*B22"),
    (26, "Post-test odds (negative)", "=B24*B23"),
    (27, "Post-test probability from odds (positive)", "=B25/(1+B25)"),
    (29, "Post-test probability from odds (negative)", "=B26/(1+B26)"),
    (30, "Agreement check", "=ROUND(B27-B18,10)"),
];

/// Inputs for a seed: seed 0 is the worked example (0.1, 0.9, 0.8); other
/// seeds draw multiples of 0.05 giving an informative test.
fn inputs(seed: u64) -> [Rational; 3] {
    if seed == 0 {
        return [ratio(1, 10), ratio(9, 10), ratio(4, 5)];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = |lo: i64, hi: i64| ratio(rng.random_range(lo..=hi), 20);
    [step(1, 10), step(11, 19), step(11, 19)]
}

/// A post-test probability calculator laid out as a labelled list of
/// inputs, a 2x2 contingency table and derived probabilities.
pub fn gen_bayes(spec: &FixtureSpec) -> Workbook {
    let l = BAYES_LAYOUT;
    let mut sheet = Sheet::new(l.sheet);
    sheet.set("A1", synthesized(CellContent::text("Post-test probability of disease")));
    sheet.set("A2", synthesized(CellContent::text("Enter the pre-test values as proportions")));
    let [prev, sens, spec_] = inputs(spec.seed);
    for (row, label, value) in [(3, "Prevalence", prev), (4, "Sensitivity", sens), (5, "Specificity", spec_)] {
        sheet.set(&format!("A{row}"), synthesized(CellContent::text(label)));
        sheet.set(
            &format!("B{row}"),
            synthesized(CellContent::number(value).unlocked().with_validation(ValidationRule::range(
                ValidationKind::DecimalRange,
                Rational::zero(),
                Rational::one(),
            ))),
        );
    }
    sheet.set("A6", synthesized(CellContent::text("Contingency table")));
    sheet.set("A17", synthesized(CellContent::text("Results")));
    for (row, label, formula) in FORMULAS {
        sheet.set(&format!("A{row}"), synthesized(CellContent::text(label)));
        let format = if row >= 18 { NumberFormat::fixed(3) } else { NumberFormat::general() };
        sheet.set(&format!("B{row}"), synthesized(CellContent::formula(formula).with_format(format)));
    }
    Workbook::new(vec![sheet]).expect("fixture layout is valid")
}
